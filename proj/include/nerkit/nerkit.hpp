// Copyright 2026 The nerkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NERKIT_NERKIT_HPP_
#define NERKIT_NERKIT_HPP_

#include "nerkit/char_cnn.hpp"
#include "nerkit/crf.hpp"
#include "nerkit/data_io.hpp"
#include "nerkit/errors.hpp"
#include "nerkit/layers.hpp"
#include "nerkit/lexicon.hpp"
#include "nerkit/model.hpp"
#include "nerkit/parameters.hpp"
#include "nerkit/rng.hpp"
#include "nerkit/tagger.hpp"
#include "nerkit/tagging.hpp"
#include "nerkit/tensor.hpp"
#include "nerkit/text.hpp"
#include "nerkit/trainer.hpp"
#include "nerkit/word_features.hpp"

#endif  // NERKIT_NERKIT_HPP_
