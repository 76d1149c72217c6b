#pragma once

#include "rkhsmm/bench.hpp"
#include "rkhsmm/errors.hpp"
#include "rkhsmm/gfunction.hpp"
#include "rkhsmm/gram.hpp"
#include "rkhsmm/group_lasso.hpp"
#include "rkhsmm/groups.hpp"
#include "rkhsmm/kernel.hpp"
#include "rkhsmm/meta_model.hpp"
#include "rkhsmm/model_select.hpp"
#include "rkhsmm/parallel.hpp"
#include "rkhsmm/ridge_group_sparse.hpp"
#include "rkhsmm/root_find.hpp"
#include "rkhsmm/sobol.hpp"
