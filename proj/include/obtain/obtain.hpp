#pragma once

#include "obtain/audio.hpp"
#include "obtain/cbss.hpp"
#include "obtain/detector.hpp"
#include "obtain/errors.hpp"
#include "obtain/fft.hpp"
#include "obtain/metrics.hpp"
#include "obtain/onset.hpp"
#include "obtain/pipeline.hpp"
#include "obtain/ring_buffer.hpp"
#include "obtain/rng.hpp"
#include "obtain/tempo.hpp"
#include "obtain/wav.hpp"
