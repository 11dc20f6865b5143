#pragma once

// Convenience umbrella header.
#include "annoloop/bridge.hpp"
#include "annoloop/campaign.hpp"
#include "annoloop/canonical.hpp"
#include "annoloop/compare.hpp"
#include "annoloop/dataset.hpp"
#include "annoloop/detector.hpp"
#include "annoloop/errors.hpp"
#include "annoloop/geometry.hpp"
#include "annoloop/ingest.hpp"
#include "annoloop/matching.hpp"
#include "annoloop/random.hpp"
#include "annoloop/report.hpp"
#include "annoloop/scheduling.hpp"
#include "annoloop/synthetic.hpp"
#include "annoloop/workload.hpp"
