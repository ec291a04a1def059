#pragma once

#include "vistra/ops/conv.hpp"
#include "vistra/ops/counter.hpp"
#include "vistra/ops/dropout.hpp"
#include "vistra/ops/elementwise.hpp"
#include "vistra/ops/loss.hpp"
#include "vistra/ops/matmul.hpp"
#include "vistra/ops/norm.hpp"
#include "vistra/ops/pool.hpp"
#include "vistra/ops/resize.hpp"
#include "vistra/ops/shape_ops.hpp"
#include "vistra/ops/softmax.hpp"
