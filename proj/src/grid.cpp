#include "sgspde/grid.hpp"

namespace sgspde {

template class BasicGrid<double>;
template struct BasicField<double>;

}  // namespace sgspde
