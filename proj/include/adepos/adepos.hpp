#pragma once

// Convenience include for the whole pipeline.

#include "adepos/calibration.hpp"
#include "adepos/config.hpp"
#include "adepos/controller.hpp"
#include "adepos/elm.hpp"
#include "adepos/energy.hpp"
#include "adepos/ensemble.hpp"
#include "adepos/features.hpp"
#include "adepos/fixed_point.hpp"
#include "adepos/ingest.hpp"
#include "adepos/kv_file.hpp"
#include "adepos/prbs.hpp"
#include "adepos/seeds.hpp"
#include "adepos/serialize.hpp"
