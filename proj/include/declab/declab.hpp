#pragma once

/** declab.hpp - convenience umbrella for the whole library. */

#include "declab/cluster.hpp"
#include "declab/common.hpp"
#include "declab/dataset.hpp"
#include "declab/decode.hpp"
#include "declab/entail.hpp"
#include "declab/experiment.hpp"
#include "declab/metrics.hpp"
#include "declab/mock_nli.hpp"
#include "declab/model.hpp"
#include "declab/nli.hpp"
#include "declab/prob.hpp"
#include "declab/record.hpp"
#include "declab/report.hpp"
#include "declab/spec_oracle.hpp"
#include "declab/text.hpp"
#include "declab/vocab.hpp"
