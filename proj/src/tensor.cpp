#include "racmc/tensor.hpp"

namespace racmc {

thread_local Tape* Tape::active_ = nullptr;

}  // namespace racmc
