#pragma once

#include "lbpfc/adapt.hpp"
#include "lbpfc/assembly.hpp"
#include "lbpfc/config.hpp"
#include "lbpfc/errors.hpp"
#include "lbpfc/experiment.hpp"
#include "lbpfc/expression.hpp"
#include "lbpfc/io.hpp"
#include "lbpfc/mesh.hpp"
#include "lbpfc/model.hpp"
#include "lbpfc/params.hpp"
#include "lbpfc/quadrature.hpp"
#include "lbpfc/solver.hpp"
#include "lbpfc/sparse.hpp"
#include "lbpfc/stepper.hpp"
#include "lbpfc/study.hpp"
