#pragma once

#include "judgekit/backend.hpp"
#include "judgekit/criteria.hpp"
#include "judgekit/dataset.hpp"
#include "judgekit/error.hpp"
#include "judgekit/lint.hpp"
#include "judgekit/metrics.hpp"
#include "judgekit/pipeline.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/report.hpp"
#include "judgekit/shots.hpp"
#include "judgekit/verdict.hpp"
