#pragma once

#include <cstdint>

#include "ffpkit/common.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

// Channel-concatenates [noisy | source | zero-padded first frame | mask]
// into a (F, H, W, 3C+1) composite. The first-frame latent occupies frame 0
// of its band and zeros elsewhere; the mask channel is 1 on frame 0, else 0.
inline Tensor assemble_conditioning(const Tensor& noisy, const Tensor& source,
                                    const Tensor& first_frame) {
    check_arg(noisy.rank() == 4, "noisy latent must be rank-4 (F,H,W,C)");
    check_arg(noisy.same_shape(source), "noisy and source latent shapes differ");
    check_arg(first_frame.rank() == 4 && first_frame.dim(0) == 1,
              "first-frame latent must be rank-4 with a single frame");
    const int64_t frames = noisy.dim(0), height = noisy.dim(1);
    const int64_t width = noisy.dim(2), ch = noisy.dim(3);
    check_arg(first_frame.dim(1) == height && first_frame.dim(2) == width &&
                  first_frame.dim(3) == ch,
              "first-frame latent spatial/channel dims must match");

    Tensor out({frames, height, width, 3 * ch + 1});
    for (int64_t f = 0; f < frames; ++f)
        for (int64_t y = 0; y < height; ++y)
            for (int64_t x = 0; x < width; ++x) {
                for (int64_t c = 0; c < ch; ++c) {
                    out.at4(f, y, x, c) = noisy.at4(f, y, x, c);
                    out.at4(f, y, x, ch + c) = source.at4(f, y, x, c);
                    if (f == 0) out.at4(f, y, x, 2 * ch + c) = first_frame.at4(0, y, x, c);
                }
                out.at4(f, y, x, 3 * ch) = f == 0 ? 1.0 : 0.0;
            }
    return out;
}

}  // namespace ffpkit
