#pragma once

#include "lpvembed/expr.hpp"
#include "lpvembed/parse.hpp"
#include "lpvembed/quadrature.hpp"
#include "lpvembed/eval.hpp"
#include "lpvembed/simplify.hpp"
#include "lpvembed/diff.hpp"
#include "lpvembed/model.hpp"
#include "lpvembed/factorize.hpp"
#include "lpvembed/lpv.hpp"
#include "lpvembed/sim.hpp"
#include "lpvembed/serialize.hpp"
#include "lpvembed/corpus.hpp"
