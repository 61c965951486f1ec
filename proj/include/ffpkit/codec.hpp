#pragma once

#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ffpkit/common.hpp"
#include "ffpkit/rng.hpp"
#include "ffpkit/synth.hpp"
#include "ffpkit/tensor.hpp"

namespace ffpkit {

// Fixed seeded linear codec between pixel patches and latent channels.
// proj has orthonormal rows built as Q * P0, where P0 averages disjoint
// groups of patch coordinates and Q is orthogonal. Decoding therefore maps
// [0,1] pixels to per-group means back inside [0,1], so the decode clamp
// stays inactive on the codec's own range and encode-decode-encode is the
// identity on latents.
struct ToyCodec {
    int64_t patch = 2;
    int64_t channels = 4;
    Tensor proj;  // (channels, patch*patch*3)

    int64_t patch_dim() const { return patch * patch * 3; }
};

inline ToyCodec make_codec(uint64_t seed, int64_t patch = 2, int64_t channels = 4) {
    check_arg(patch >= 1, "patch size must be positive");
    const int64_t d = patch * patch * 3;
    check_arg(channels >= 1 && channels <= d,
              "latent channels must lie in [1, patch*patch*3]");
    Rng rng = stream_for(seed, stream_tag::codec);

    std::vector<int64_t> perm(static_cast<size_t>(d));
    for (int64_t i = 0; i < d; ++i) perm[size_t(i)] = i;
    for (int64_t i = d - 1; i > 0; --i)
        std::swap(perm[size_t(i)], perm[size_t(rng.next_below(uint64_t(i + 1)))]);

    Tensor p0({channels, d});
    int64_t next = 0;
    for (int64_t g = 0; g < channels; ++g) {
        const int64_t size = d / channels + (g < d % channels ? 1 : 0);
        const double w = 1.0 / std::sqrt(double(size));
        for (int64_t k = 0; k < size; ++k) p0.at(g, perm[size_t(next++)]) = w;
    }

    Tensor gauss({channels, channels});
    gauss.fill_normal(rng);
    Eigen::HouseholderQR<EigenRowMat> qr(as_matrix(gauss));
    const EigenRowMat q = qr.householderQ();

    ToyCodec codec;
    codec.patch = patch;
    codec.channels = channels;
    codec.proj = Tensor({channels, d});
    as_matrix(codec.proj) = q * as_matrix(p0);
    return codec;
}

// (F,H,W,3) pixels -> (F,H/p,W/p,C) latents via per-patch projection.
inline Tensor toy_encode(const ToyCodec& codec, const VideoClip& clip) {
    const Tensor& px = clip.pixels;
    check_arg(px.rank() == 4 && px.dim(3) == 3, "clip must be (F,H,W,3)");
    const int64_t f = px.dim(0), h = px.dim(1), w = px.dim(2), p = codec.patch;
    check_arg(h % p == 0 && w % p == 0, "clip dims must be divisible by the patch size");

    Tensor latent({f, h / p, w / p, codec.channels});
    std::vector<double> vec(size_t(codec.patch_dim()));
    for (int64_t fr = 0; fr < f; ++fr)
        for (int64_t py = 0; py < h / p; ++py)
            for (int64_t px_i = 0; px_i < w / p; ++px_i) {
                int64_t k = 0;
                for (int64_t dy = 0; dy < p; ++dy)
                    for (int64_t dx = 0; dx < p; ++dx)
                        for (int64_t c = 0; c < 3; ++c)
                            vec[size_t(k++)] = px.at4(fr, py * p + dy, px_i * p + dx, c);
                for (int64_t ch = 0; ch < codec.channels; ++ch) {
                    double acc = 0.0;
                    for (int64_t j = 0; j < codec.patch_dim(); ++j)
                        acc += codec.proj.at(ch, j) * vec[size_t(j)];
                    latent.at4(fr, py, px_i, ch) = acc;
                }
            }
    return latent;
}

// Transpose projection back to pixels, clamped to [0,1].
inline VideoClip toy_decode(const ToyCodec& codec, const Tensor& latent) {
    check_arg(latent.rank() == 4 && latent.dim(3) == codec.channels,
              "latent must be (F,H',W',C) for this codec");
    const int64_t f = latent.dim(0), hh = latent.dim(1), ww = latent.dim(2), p = codec.patch;

    VideoClip clip;
    clip.pixels = Tensor({f, hh * p, ww * p, 3});
    for (int64_t fr = 0; fr < f; ++fr)
        for (int64_t py = 0; py < hh; ++py)
            for (int64_t px_i = 0; px_i < ww; ++px_i) {
                int64_t k = 0;
                for (int64_t dy = 0; dy < p; ++dy)
                    for (int64_t dx = 0; dx < p; ++dx)
                        for (int64_t c = 0; c < 3; ++c) {
                            double acc = 0.0;
                            for (int64_t ch = 0; ch < codec.channels; ++ch)
                                acc += codec.proj.at(ch, k) * latent.at4(fr, py, px_i, ch);
                            clip.pixels.at4(fr, py * p + dy, px_i * p + dx, c) =
                                std::min(1.0, std::max(0.0, acc));
                            ++k;
                        }
            }
    return clip;
}

// Latent views of one sample; the first-frame latent shares bits with the
// target's frame 0 because the underlying pixels are identical.
struct EncodedSample {
    Tensor source;  // (F,H',W',C)
    Tensor target;  // (F,H',W',C)
    Tensor first;   // (1,H',W',C)
};

inline EncodedSample encode_sample(const ToyCodec& codec, const FfpSample& s) {
    EncodedSample e;
    e.source = toy_encode(codec, s.source);
    e.target = toy_encode(codec, s.target);
    VideoClip edited;
    edited.pixels = s.edited_first_frame;
    e.first = toy_encode(codec, edited);
    return e;
}

}  // namespace ffpkit
