#pragma once

#include "efr/comb_filter.hpp"
#include "efr/event.hpp"
#include "efr/event_io.hpp"
#include "efr/filter_bank.hpp"
#include "efr/metrics.hpp"
#include "efr/spectral.hpp"
#include "efr/synth.hpp"
