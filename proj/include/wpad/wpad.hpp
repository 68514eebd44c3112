#pragma once

// Wavelet-based presentation attack detection: level-1 2D DWT feature
// extraction, a small residual CNN with explicit forward/backward passes,
// an SGD training loop, and biometric evaluation metrics (ROC/AUC/CMC).

#include "wpad/checkpoint.hpp"
#include "wpad/config.hpp"
#include "wpad/data.hpp"
#include "wpad/errors.hpp"
#include "wpad/metrics.hpp"
#include "wpad/model.hpp"
#include "wpad/nn.hpp"
#include "wpad/pgm.hpp"
#include "wpad/random.hpp"
#include "wpad/tensor.hpp"
#include "wpad/train.hpp"
#include "wpad/wavelet.hpp"
