#pragma once

#include "siamsa/tensor.hpp"
#include "siamsa/ops.hpp"
#include "siamsa/rng.hpp"
#include "siamsa/se_backbone.hpp"
#include "siamsa/psa.hpp"
#include "siamsa/sa_apn.hpp"
#include "siamsa/bbox.hpp"
#include "siamsa/image.hpp"
#include "siamsa/image_io.hpp"
#include "siamsa/weights_io.hpp"
#include "siamsa/tracker.hpp"
#include "siamsa/metrics.hpp"
#include "siamsa/dataset.hpp"
#include "siamsa/synth.hpp"
#include "siamsa/evaluation.hpp"
