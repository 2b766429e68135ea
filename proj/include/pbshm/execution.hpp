#pragma once

namespace pbshm {

/// Selects the serial reference kernels or their OpenMP counterparts. Both
/// produce bit-identical results; the serial path exists for verification.
enum class Execution { serial, parallel };

}  // namespace pbshm
