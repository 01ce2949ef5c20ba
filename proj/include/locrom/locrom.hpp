#pragma once

#include "locrom/assignment.hpp"
#include "locrom/clustering.hpp"
#include "locrom/core/error.hpp"
#include "locrom/core/parallel.hpp"
#include "locrom/core/text.hpp"
#include "locrom/fom/model.hpp"
#include "locrom/fom/operators.hpp"
#include "locrom/fom/steady_solve.hpp"
#include "locrom/linalg/dense_matrix.hpp"
#include "locrom/linalg/lu.hpp"
#include "locrom/linalg/matrix_io.hpp"
#include "locrom/linalg/svd.hpp"
#include "locrom/linalg/symmetric_eigen.hpp"
#include "locrom/pipeline/config.hpp"
#include "locrom/pipeline/pipeline.hpp"
#include "locrom/podbasis.hpp"
#include "locrom/rom.hpp"
#include "locrom/sampling.hpp"
#include "locrom/snapshots.hpp"
