#pragma once

#include "xlsim/config.hpp"
#include "xlsim/dataset.hpp"
#include "xlsim/embedstore.hpp"
#include "xlsim/encoder/backends.hpp"
#include "xlsim/encoder/encoding.hpp"
#include "xlsim/encoder/protocol.hpp"
#include "xlsim/experiments.hpp"
#include "xlsim/metrics.hpp"
#include "xlsim/scoring.hpp"
#include "xlsim/translation/align.hpp"
#include "xlsim/translation/cache.hpp"
#include "xlsim/translation/http_engines.hpp"
#include "xlsim/translation/types.hpp"
#include "xlsim/translation/views.hpp"
