#pragma once

#include "texunwarp/datagen.hpp"
#include "texunwarp/training.hpp"

namespace texunwarp::test {

/// 16 px networks small enough for unit tests to train in well under a second.
inline ModelConfig tiny_model() {
  ModelConfig m;
  m.resolution = 16;
  m.crop_size = 16;
  m.content_grid = 4;
  m.normal_grid = 4;
  m.gen_levels = 2;
  m.content_channels = 4;
  m.style_dim = 8;
  m.width = 8;
  m.disc_patch = 4;
  return m;
}

inline DatagenConfig tiny_datagen() {
  DatagenConfig d;
  d.resolution = 16;
  d.crop_size = 16;
  d.map_size = 32;
  return d;
}

inline TrainConfig tiny_train(Stage stage, int64_t steps = 4) {
  TrainConfig c;
  c.stage = stage;
  c.steps = steps;
  c.batch = 4;
  c.model = tiny_model();
  return c;
}

inline TrainingData tiny_data(int count, std::uint64_t seed = 1) {
  const auto samples = generate_samples(tiny_datagen(), count, seed);
  return TrainingData::from_samples(samples);
}

}  // namespace texunwarp::test
