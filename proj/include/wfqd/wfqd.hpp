#pragma once

#include "wfqd/qcore.hpp"
#include "wfqd/gue.hpp"
#include "wfqd/wf_model.hpp"
#include "wfqd/discrimination.hpp"
#include "wfqd/ewfs_model.hpp"
#include "wfqd/harness.hpp"
