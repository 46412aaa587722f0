#pragma once

// Umbrella header. The gateway is excluded because it pulls in the HTTP
// stack; include querywatch/gateway.hpp explicitly where needed.

#include "querywatch/attack_sim.hpp"
#include "querywatch/audio.hpp"
#include "querywatch/calibration.hpp"
#include "querywatch/detector.hpp"
#include "querywatch/errors.hpp"
#include "querywatch/fingerprint.hpp"
#include "querywatch/metrics.hpp"
#include "querywatch/similarity.hpp"
#include "querywatch/synth.hpp"
