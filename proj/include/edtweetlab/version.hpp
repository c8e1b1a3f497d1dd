#ifndef EDTWEETLAB_VERSION_HPP_
#define EDTWEETLAB_VERSION_HPP_

namespace edtweetlab {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace edtweetlab

#endif  // EDTWEETLAB_VERSION_HPP_
