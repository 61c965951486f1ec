#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffpkit/container.hpp"
#include "ffpkit/synth.hpp"

namespace ffpkit {

namespace detail {

inline Tensor motion_to_tensor(const MotionSpec& m, EditKind kind) {
    return Tensor({13}, {double(int(kind)), double(int(m.kind)), double(m.rect_h),
                         double(m.rect_w), m.start_y, m.start_x, m.vel_y, m.vel_x, m.center_y,
                         m.center_x, m.radius, m.omega, m.phase});
}

inline void motion_from_tensor(const Tensor& t, MotionSpec& m, EditKind& kind) {
    check(t.size() == 13, ErrorCode::io_error, "sample metadata has wrong length");
    kind = edit_kind_from_index(int64_t(t[0]));
    const int64_t traj = int64_t(t[1]);
    check(traj == 0 || traj == 1, ErrorCode::io_error, "unknown trajectory kind");
    m.kind = traj == 0 ? TrajectoryKind::linear : TrajectoryKind::circular;
    m.rect_h = int64_t(t[2]);
    m.rect_w = int64_t(t[3]);
    m.start_y = t[4];
    m.start_x = t[5];
    m.vel_y = t[6];
    m.vel_x = t[7];
    m.center_y = t[8];
    m.center_x = t[9];
    m.radius = t[10];
    m.omega = t[11];
    m.phase = t[12];
}

}  // namespace detail

inline void save_dataset(const std::string& path, const std::vector<FfpSample>& samples) {
    std::vector<NamedTensor> out;
    out.push_back({"dataset.count", Tensor::scalar(double(samples.size()))});
    for (size_t i = 0; i < samples.size(); ++i) {
        const FfpSample& s = samples[i];
        const std::string pre = "s" + std::to_string(i) + ".";
        out.push_back({pre + "source", s.source.pixels});
        out.push_back({pre + "target", s.target.pixels});
        out.push_back({pre + "edited", s.edited_first_frame});
        out.push_back({pre + "background", s.background});
        out.push_back({pre + "mix", s.restyle_mix});
        out.push_back({pre + "color", s.object_color});
        out.push_back({pre + "swap", s.swap_color});
        out.push_back({pre + "meta", detail::motion_to_tensor(s.motion, s.edit_kind)});
    }
    save_tensors(path, out);
}

inline std::vector<FfpSample> load_dataset(const std::string& path) {
    const std::vector<NamedTensor> raw = load_tensors(path);
    check(!raw.empty() && raw[0].name == "dataset.count" && raw[0].value.size() == 1,
          ErrorCode::io_error, "not a dataset container: " + path);
    const int64_t count = int64_t(raw[0].value[0]);
    check(count >= 0 && 1 + count * 8 == int64_t(raw.size()), ErrorCode::io_error,
          "dataset tensor count mismatch");

    std::vector<FfpSample> samples(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        const std::string pre = "s" + std::to_string(i) + ".";
        FfpSample& s = samples[size_t(i)];
        const NamedTensor* base = &raw[size_t(1 + i * 8)];
        const char* want[8] = {"source", "target",     "edited", "background",
                               "mix",    "color",      "swap",   "meta"};
        for (int k = 0; k < 8; ++k)
            check(base[k].name == pre + want[k], ErrorCode::io_error,
                  "dataset missing tensor " + pre + want[k]);
        s.source.pixels = base[0].value;
        s.target.pixels = base[1].value;
        s.edited_first_frame = base[2].value;
        s.background = base[3].value;
        s.restyle_mix = base[4].value;
        s.object_color = base[5].value;
        s.swap_color = base[6].value;
        detail::motion_from_tensor(base[7].value, s.motion, s.edit_kind);

        // Constructed invariant, revalidated on load.
        const int64_t per = s.edited_first_frame.size();
        check(s.target.pixels.size() >= per &&
                  max_abs_diff(s.edited_first_frame,
                               Tensor(s.edited_first_frame.shape(),
                                      std::vector<double>(s.target.pixels.data(),
                                                          s.target.pixels.data() + per))) == 0.0,
              ErrorCode::io_error, "target frame 0 does not match the edited first frame");
    }
    return samples;
}

}  // namespace ffpkit
