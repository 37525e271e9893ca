#ifndef HIDEC_HIDEC_HPP
#define HIDEC_HIDEC_HPP

// Umbrella header for the whole library.

#include <hidec/checkpoint.hpp>
#include <hidec/config.hpp>
#include <hidec/corpus.hpp>
#include <hidec/datagen.hpp>
#include <hidec/decoder.hpp>
#include <hidec/encoder.hpp>
#include <hidec/errors.hpp>
#include <hidec/gradcheck.hpp>
#include <hidec/inference.hpp>
#include <hidec/metrics.hpp>
#include <hidec/model.hpp>
#include <hidec/optimizer.hpp>
#include <hidec/rng.hpp>
#include <hidec/subhier.hpp>
#include <hidec/taxonomy.hpp>
#include <hidec/tensor.hpp>
#include <hidec/training.hpp>
#include <hidec/vocab.hpp>

#endif  // HIDEC_HIDEC_HPP
