/*
 * Copyright 2026 The illume Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef ILLUME_ILLUME_HPP
#define ILLUME_ILLUME_HPP

#include "illume/autodiff.hpp"
#include "illume/common.hpp"
#include "illume/dataio.hpp"
#include "illume/evalmetrics.hpp"
#include "illume/explain.hpp"
#include "illume/geometry.hpp"
#include "illume/metaenc.hpp"
#include "illume/pipeline.hpp"
#include "illume/serialize.hpp"
#include "illume/surrogate.hpp"
#include "illume/synthbench.hpp"
#include "illume/tensor.hpp"

#endif  // ILLUME_ILLUME_HPP
