// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "moelab/cache.hpp"
#include "moelab/codec.hpp"
#include "moelab/error.hpp"
#include "moelab/parallel.hpp"
#include "moelab/ratio.hpp"
#include "moelab/report.hpp"
#include "moelab/specialization.hpp"
#include "moelab/srp.hpp"
#include "moelab/synth.hpp"
#include "moelab/trace.hpp"
