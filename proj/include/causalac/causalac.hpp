#pragma once

#include "causalac/circuit.hpp"
#include "causalac/compile.hpp"
#include "causalac/elimination_order.hpp"
#include "causalac/em.hpp"
#include "causalac/error.hpp"
#include "causalac/evaluate.hpp"
#include "causalac/factor.hpp"
#include "causalac/generators.hpp"
#include "causalac/jointree.hpp"
#include "causalac/model.hpp"
#include "causalac/oracle.hpp"
