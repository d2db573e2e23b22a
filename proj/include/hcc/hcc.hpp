#pragma once

// Everything except the HTTP service (hcc/service.hpp), which pulls in cpp-httplib.

#include "hcc/clustering.hpp"
#include "hcc/coherence.hpp"
#include "hcc/core.hpp"
#include "hcc/eval.hpp"
#include "hcc/parallel.hpp"
#include "hcc/pipeline.hpp"
#include "hcc/simgen.hpp"
#include "hcc/spectral.hpp"
