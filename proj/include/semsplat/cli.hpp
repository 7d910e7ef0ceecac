// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace semsplat {

/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace semsplat
