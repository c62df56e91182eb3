#pragma once

#include <string>

#include "ddar/baselines.hpp"
#include "ddar/model.hpp"

namespace ddar {

// Binary checkpoint container shared by DDAR and the softmax baseline.
// Layout: magic "DDAR", format version u32, length-prefixed key/value header
// (dimensions, sigma, lambda, class count, method tag), then raw
// little-endian float64 arrays in a fixed documented order.
//
// Load errors name the offending field; round-trips are byte-identical.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const DdarModel& model, const std::string& path);
// method tags a dropout-trained model so eval picks the right predictor
void save_checkpoint(const SoftmaxModel& model, const std::string& path,
                     const std::string& method = "softmax");

// Method tag from the header: "ddar", "softmax", or "dropout".
std::string checkpoint_method(const std::string& path);

DdarModel load_ddar_checkpoint(const std::string& path);
SoftmaxModel load_softmax_checkpoint(const std::string& path);

}  // namespace ddar
