// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace fst {

int max_threads();
void set_threads(int n);

/// Caps the OpenMP team size at $FST_THREADS when set. Returns the resulting cap.
int configure_threads_from_env();

}  // namespace fst
