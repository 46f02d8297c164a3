#include "gist/gan/losses.hpp"

namespace gist::gan {

template DLoss d_loss<float>(Discriminator<float>&, Generator<float>&, const FeatureMap<float>&, std::span<const int>,
                             const Mat<float>&, std::span<const int>, double, bool, int);
template double g_loss<float>(Discriminator<float>&, Generator<float>&, const Mat<float>&, std::span<const int>);

}  // namespace gist::gan
