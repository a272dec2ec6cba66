// SPDX-License-Identifier: Apache-2.0
#include "melvc/errors.hpp"

namespace melvc {
// Error types are header-only; this unit anchors the vtables.
}  // namespace melvc
