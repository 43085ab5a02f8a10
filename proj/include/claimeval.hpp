// Everything except the HTTP transport (claimeval/judge_http.hpp), which
// needs OpenSSL's TLS library and CPPHTTPLIB_OPENSSL_SUPPORT.
#pragma once

#include "claimeval/attention.hpp"
#include "claimeval/corpus.hpp"
#include "claimeval/digest.hpp"
#include "claimeval/error.hpp"
#include "claimeval/harness.hpp"
#include "claimeval/judge.hpp"
#include "claimeval/lexmetrics.hpp"
#include "claimeval/model_io.hpp"
#include "claimeval/random.hpp"
#include "claimeval/scorer.hpp"
#include "claimeval/stats.hpp"
#include "claimeval/tensor.hpp"
#include "claimeval/text.hpp"
#include "claimeval/trainer.hpp"
