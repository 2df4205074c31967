#include "tryon/synthetic.hpp"

#include "tryon/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tryon {

namespace {

using Rgb = std::array<uint8_t, 3>;

struct Vec2 {
    double x = 0, y = 0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

// Portable uniform draws; std distributions differ between standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
    size_t index(size_t n) { return static_cast<size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

double deg(double d) { return d * std::numbers::pi / 180.0; }

struct Pose {
    std::array<double, 2> upper_arm{};  // angle from vertical, outward positive
    std::array<double, 2> forearm{};
    std::array<double, 2> thigh{};
    std::array<double, 2> shin{};
    double offset = 0;  // horizontal figure shift in pixels
};

struct Appearance {
    Rgb skin, hair, pants, shoes;
    TextureStyle style;
    Rgb c1, c2;
    double period;
};

class Canvas {
public:
    Canvas(int64_t h, int64_t w, Rgb background)
        : h_(h), w_(w), labels_(static_cast<size_t>(h * w), 0), rgb_(static_cast<size_t>(h * w), background) {}

    template <class Inside, class Colour>
    void paint(Label label, Vec2 lo, Vec2 hi, Inside inside, Colour colour, bool set_label = true) {
        const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(lo.x)));
        const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(lo.y)));
        const int64_t x1 = std::min<int64_t>(w_ - 1, static_cast<int64_t>(std::ceil(hi.x)));
        const int64_t y1 = std::min<int64_t>(h_ - 1, static_cast<int64_t>(std::ceil(hi.y)));
        for (int64_t y = y0; y <= y1; ++y) {
            for (int64_t x = x0; x <= x1; ++x) {
                const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
                if (!inside(p)) continue;
                const size_t i = static_cast<size_t>(y * w_ + x);
                if (set_label) labels_[i] = static_cast<int64_t>(label);
                rgb_[i] = colour(p);
            }
        }
    }

    torch::Tensor labels() const {
        return torch::from_blob(const_cast<int64_t*>(labels_.data()), {h_, w_}, torch::kLong).clone();
    }

    torch::Tensor image() const {
        auto raw = torch::from_blob(const_cast<Rgb*>(rgb_.data()), {h_, w_, 3}, torch::kUInt8);
        return from_rgb8(raw.clone());
    }

private:
    int64_t h_, w_;
    std::vector<int64_t> labels_;
    std::vector<Rgb> rgb_;
};

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a, ap = p - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 d = p - (a + t * ab);
    return std::sqrt(d.x * d.x + d.y * d.y);
}

auto capsule(Vec2 a, Vec2 b, double r) {
    return [=](Vec2 p) { return segment_distance(p, a, b) <= r; };
}

auto ellipse(Vec2 c, double rx, double ry) {
    return [=](Vec2 p) {
        const double dx = (p.x - c.x) / rx, dy = (p.y - c.y) / ry;
        return dx * dx + dy * dy <= 1.0;
    };
}

// Convex quad, vertices in either winding order.
auto quad(std::array<Vec2, 4> v) {
    return [=](Vec2 p) {
        int sign = 0;
        for (size_t i = 0; i < 4; ++i) {
            const Vec2 a = v[i], b = v[(i + 1) % 4];
            const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
            if (s == 0) continue;
            if (sign == 0) sign = s;
            if (s != sign) return false;
        }
        return true;
    };
}

auto solid(Rgb c) {
    return [=](Vec2) { return c; };
}

Rgb mix(Rgb a, Rgb b) {
    return {static_cast<uint8_t>((a[0] + b[0]) / 2), static_cast<uint8_t>((a[1] + b[1]) / 2),
            static_cast<uint8_t>((a[2] + b[2]) / 2)};
}

int band(double v, double period) {
    const auto k = static_cast<int64_t>(std::floor(v / period));
    return static_cast<int>(((k % 2) + 2) % 2);
}

// Texture in garment coordinates: origin at the collar centre, unit = half
// the shoulder width.
Rgb texture(const Appearance& a, double u, double v) {
    switch (a.style) {
        case TextureStyle::Solid:
            return a.c1;
        case TextureStyle::Stripes:
            return band(v, a.period) ? a.c2 : a.c1;
        case TextureStyle::Plaid: {
            const int n = band(u, a.period) + band(v, a.period);
            return n == 0 ? a.c1 : (n == 1 ? mix(a.c1, a.c2) : a.c2);
        }
        case TextureStyle::Logo:
            return std::abs(u) + std::abs(v - 1.0) < 0.35 ? a.c2 : a.c1;
    }
    return a.c1;
}

constexpr Rgb kPersonBackground = {230, 230, 230};
constexpr Rgb kGarmentBackground = {255, 255, 255};

Rgb random_colour(Rng& rng, int lo, int hi) {
    return {static_cast<uint8_t>(rng.uniform(lo, hi)), static_cast<uint8_t>(rng.uniform(lo, hi)),
            static_cast<uint8_t>(rng.uniform(lo, hi))};
}

Appearance sample_appearance(Rng& rng, std::optional<TextureStyle> style) {
    static constexpr std::array<Rgb, 4> skins = {{{224, 172, 138}, {198, 134, 100}, {141, 85, 54}, {250, 205, 170}}};
    static constexpr std::array<Rgb, 4> hairs = {{{40, 30, 20}, {90, 60, 30}, {20, 20, 20}, {160, 120, 60}}};
    static constexpr std::array<Rgb, 4> pants = {{{40, 50, 90}, {60, 60, 60}, {90, 70, 50}, {30, 80, 60}}};
    Appearance a;
    a.skin = skins[rng.index(skins.size())];
    a.hair = hairs[rng.index(hairs.size())];
    a.pants = pants[rng.index(pants.size())];
    a.shoes = {50, 40, 35};
    const size_t drawn = rng.index(kNumTextureStyles);
    a.style = style.value_or(static_cast<TextureStyle>(drawn));
    a.c1 = random_colour(rng, 30, 225);
    // second colour far from the first in every channel
    for (size_t i = 0; i < 3; ++i) {
        a.c2[i] = static_cast<uint8_t>(a.c1[i] < 128 ? a.c1[i] + 100 : a.c1[i] - 100);
    }
    a.period = rng.uniform(0.3, 0.5);
    return a;
}

Pose canonical_pose(TextureStyle style) {
    Pose p;
    switch (style) {
        case TextureStyle::Solid:
            p.upper_arm = {8, 8};
            p.forearm = {5, 5};
            p.thigh = {4, 4};
            break;
        case TextureStyle::Stripes:
            p.upper_arm = {35, 35};
            p.forearm = {50, 50};
            p.thigh = {14, 14};
            break;
        case TextureStyle::Plaid:
            p.upper_arm = {32, 32};
            p.forearm = {-20, -20};
            p.thigh = {6, 6};
            break;
        case TextureStyle::Logo:
            p.upper_arm = {38, 8};
            p.forearm = {56, 5};
            p.thigh = {4, 12};
            break;
    }
    p.shin = p.thigh;
    return p;
}

Pose jitter_pose(Pose p, Rng& rng, double width) {
    for (int s = 0; s < 2; ++s) {
        p.upper_arm[s] = std::clamp(p.upper_arm[s] + rng.uniform(-4, 4), 5.0, 40.0);
        p.forearm[s] = std::clamp(p.forearm[s] + rng.uniform(-4, 4), -25.0, 60.0);
        p.thigh[s] = std::clamp(p.thigh[s] + rng.uniform(-3, 3), 2.0, 16.0);
        p.shin[s] = std::clamp(p.thigh[s] + rng.uniform(-3, 3), -4.0, 20.0);
    }
    p.offset = rng.uniform(-0.03, 0.03) * width;
    return p;
}

Pose random_pose(Rng& rng, double width) {
    Pose p;
    for (int s = 0; s < 2; ++s) {
        p.upper_arm[s] = rng.uniform(5, 40);
        p.forearm[s] = rng.uniform(-25, 60);
        p.thigh[s] = rng.uniform(2, 16);
        p.shin[s] = std::clamp(p.thigh[s] + rng.uniform(-6, 6), -4.0, 20.0);
    }
    p.offset = rng.uniform(-0.03, 0.03) * width;
    return p;
}

PersonRecord render_person(const Pose& pose, const Appearance& look, int64_t h, int64_t w) {
    const double H = static_cast<double>(h);
    const double W = static_cast<double>(w);
    const double cx = W / 2.0 + pose.offset;
    const double neck_y = 0.24 * H;
    const double pelvis_y = neck_y + 0.30 * H;
    const Vec2 head{cx, neck_y - 0.105 * H};

    // Joints are snapped to the pixel grid first; limbs are rendered from the
    // snapped positions so every keypoint sits on its own limb.
    auto snap = [&](Vec2 p) {
        return Vec2{std::clamp(std::round(p.x), 0.0, W - 1), std::clamp(std::round(p.y), 0.0, H - 1)};
    };
    std::array<Vec2, kNumJoints> j{};
    auto at = [&](Joint k) -> Vec2& { return j[static_cast<size_t>(k)]; };
    at(Joint::Nose) = snap(head + Vec2{0, 0.01 * H});
    at(Joint::LeftEye) = snap(head + Vec2{0.022 * H, -0.012 * H});
    at(Joint::RightEye) = snap(head + Vec2{-0.022 * H, -0.012 * H});
    at(Joint::LeftEar) = snap(head + Vec2{0.047 * H, 0});
    at(Joint::RightEar) = snap(head + Vec2{-0.047 * H, 0});
    at(Joint::Neck) = snap({cx, neck_y});
    for (int s = 0; s < 2; ++s) {
        const double side = s == 0 ? 1.0 : -1.0;  // figure's left is image right
        const Vec2 shoulder = snap({cx + side * 0.085 * H, neck_y + 0.02 * H});
        const double ua = deg(pose.upper_arm[s]), fa = deg(pose.forearm[s]);
        const Vec2 elbow = snap(shoulder + 0.135 * H * Vec2{side * std::sin(ua), std::cos(ua)});
        const Vec2 wrist = snap(elbow + 0.12 * H * Vec2{side * std::sin(fa), std::cos(fa)});
        const Vec2 hip = snap({cx + side * 0.055 * H, pelvis_y});
        const double th = deg(pose.thigh[s]), sh = deg(pose.shin[s]);
        const Vec2 knee = snap(hip + 0.175 * H * Vec2{side * std::sin(th), std::cos(th)});
        const Vec2 ankle = snap(knee + 0.165 * H * Vec2{side * std::sin(sh), std::cos(sh)});
        at(static_cast<Joint>(static_cast<int>(Joint::LeftShoulder) + s)) = shoulder;
        at(static_cast<Joint>(static_cast<int>(Joint::LeftElbow) + s)) = elbow;
        at(static_cast<Joint>(static_cast<int>(Joint::LeftWrist) + s)) = wrist;
        at(static_cast<Joint>(static_cast<int>(Joint::LeftHip) + s)) = hip;
        at(static_cast<Joint>(static_cast<int>(Joint::LeftKnee) + s)) = knee;
        at(static_cast<Joint>(static_cast<int>(Joint::LeftAnkle) + s)) = ankle;
    }

    Canvas c(h, w, kPersonBackground);
    auto box = [](Vec2 a, Vec2 b, double r) {
        return std::pair<Vec2, Vec2>{{std::min(a.x, b.x) - r, std::min(a.y, b.y) - r},
                                     {std::max(a.x, b.x) + r, std::max(a.y, b.y) + r}};
    };
    auto paint_capsule = [&](Label label, Vec2 a, Vec2 b, double r, auto colour) {
        auto [lo, hi] = box(a, b, r);
        c.paint(label, lo, hi, capsule(a, b, r), colour);
    };
    auto paint_ellipse = [&](Label label, Vec2 centre, double rx, double ry, auto colour) {
        c.paint(label, centre - Vec2{rx, ry}, centre + Vec2{rx, ry}, ellipse(centre, rx, ry), colour);
    };
    auto paint_quad = [&](Label label, std::array<Vec2, 4> v, auto colour) {
        Vec2 lo{1e9, 1e9}, hi{-1e9, -1e9};
        for (auto p : v) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        }
        c.paint(label, lo, hi, quad(v), colour);
    };

    const Vec2 collar{cx, neck_y - 0.012 * H};
    const double garment_unit = 0.11 * H;
    auto cloth = [&](Vec2 p) {
        return texture(look, (p.x - collar.x) / garment_unit, (p.y - collar.y) / garment_unit);
    };

    paint_ellipse(Label::Hair, head + Vec2{0, -0.025 * H}, 0.062 * H, 0.06 * H, solid(look.hair));
    paint_capsule(Label::Neck, at(Joint::Neck), head, 0.024 * H, solid(look.skin));
    for (int s = 0; s < 2; ++s) {
        const Label leg = s == 0 ? Label::LeftLeg : Label::RightLeg;
        paint_capsule(leg, j[static_cast<size_t>(Joint::LeftKnee) + s],
                      j[static_cast<size_t>(Joint::LeftAnkle) + s], 0.034 * H, solid(look.skin));
    }
    paint_quad(Label::Pants,
               {Vec2{cx - 0.07 * H, pelvis_y - 0.04 * H}, Vec2{cx + 0.07 * H, pelvis_y - 0.04 * H},
                Vec2{cx + 0.075 * H, pelvis_y + 0.03 * H}, Vec2{cx - 0.075 * H, pelvis_y + 0.03 * H}},
               solid(look.pants));
    for (int s = 0; s < 2; ++s) {
        paint_capsule(Label::Pants, j[static_cast<size_t>(Joint::LeftHip) + s],
                      j[static_cast<size_t>(Joint::LeftKnee) + s], 0.04 * H, solid(look.pants));
        const double side = s == 0 ? 1.0 : -1.0;
        paint_ellipse(s == 0 ? Label::LeftShoe : Label::RightShoe,
                      j[static_cast<size_t>(Joint::LeftAnkle) + s] + Vec2{side * 0.01 * H, 0.02 * H},
                      0.04 * H, 0.022 * H, solid(look.shoes));
    }
    paint_quad(Label::TopClothes,
               {Vec2{cx - 0.11 * H, collar.y}, Vec2{cx + 0.11 * H, collar.y},
                Vec2{cx + 0.07 * H, pelvis_y - 0.005 * H}, Vec2{cx - 0.07 * H, pelvis_y - 0.005 * H}},
               cloth);
    for (int s = 0; s < 2; ++s) {
        const Label arm = s == 0 ? Label::LeftArm : Label::RightArm;
        const Vec2 shoulder = j[static_cast<size_t>(Joint::LeftShoulder) + s];
        const Vec2 elbow = j[static_cast<size_t>(Joint::LeftElbow) + s];
        const Vec2 wrist = j[static_cast<size_t>(Joint::LeftWrist) + s];
        paint_capsule(arm, shoulder, elbow, 0.026 * H, solid(look.skin));
        paint_capsule(arm, elbow, wrist, 0.024 * H, solid(look.skin));
        paint_capsule(Label::TopClothes, shoulder, shoulder + 0.45 * (elbow - shoulder), 0.032 * H, cloth);
        paint_ellipse(s == 0 ? Label::LeftHand : Label::RightHand, wrist, 0.026 * H, 0.026 * H,
                      solid(look.skin));
    }
    paint_ellipse(Label::Face, head, 0.055 * H, 0.07 * H, solid(look.skin));
    // facial detail: eyes and mouth change colour only, labels stay "face"
    const Rgb eye{40, 30, 30};
    const Rgb lips{150, 60, 60};
    for (Joint e : {Joint::LeftEye, Joint::RightEye}) {
        const Vec2 p = at(e);
        const double r = 0.012 * H;
        c.paint(Label::Face, p - Vec2{r, r}, p + Vec2{r, r}, ellipse(p, r, r), solid(eye), false);
    }
    const Vec2 m0 = head + Vec2{-0.018 * H, 0.035 * H}, m1 = head + Vec2{0.018 * H, 0.035 * H};
    {
        auto [lo, hi] = box(m0, m1, 0.008 * H);
        c.paint(Label::Face, lo, hi, capsule(m0, m1, 0.008 * H), solid(lips), false);
    }

    PersonRecord rec;
    rec.image = c.image();
    rec.parsing = c.labels();
    for (int k = 0; k < kNumJoints; ++k) {
        rec.keypoints[k] = Keypoint{static_cast<int>(j[k].x), static_cast<int>(j[k].y), true};
    }
    return rec;
}

void render_garment(const Appearance& look, int64_t h, int64_t w, torch::Tensor& image,
                    torch::Tensor& mask) {
    const double H = static_cast<double>(h), W = static_cast<double>(w);
    Canvas c(h, w, kGarmentBackground);
    const Vec2 collar{W / 2.0, 0.18 * H};
    const double unit = 0.30 * W;
    auto cloth = [&](Vec2 p) { return texture(look, (p.x - collar.x) / unit, (p.y - collar.y) / unit); };
    const std::array<Vec2, 4> body = {Vec2{W / 2 - 0.30 * W, 0.18 * H}, Vec2{W / 2 + 0.30 * W, 0.18 * H},
                                      Vec2{W / 2 + 0.27 * W, 0.82 * H}, Vec2{W / 2 - 0.27 * W, 0.82 * H}};
    c.paint(Label::TopClothes, {W / 2 - 0.30 * W, 0.18 * H}, {W / 2 + 0.30 * W, 0.82 * H}, quad(body), cloth);
    for (double side : {1.0, -1.0}) {
        const Vec2 a{W / 2 + side * 0.29 * W, 0.24 * H}, b{W / 2 + side * 0.42 * W, 0.40 * H};
        const double r = 0.06 * W;
        c.paint(Label::TopClothes, {std::min(a.x, b.x) - r, a.y - r}, {std::max(a.x, b.x) + r, b.y + r},
                capsule(a, b, r), cloth);
    }
    // neckline cut-out
    const double rx = 0.10 * W, ry = 0.05 * H;
    c.paint(Label::Background, collar - Vec2{rx, ry}, collar + Vec2{rx, ry}, ellipse(collar, rx, ry),
            solid(kGarmentBackground));
    image = c.image();
    mask = (c.labels() == channel(Label::TopClothes)).to(torch::kFloat);
}

}  // namespace

bool joint_label_allowed(Joint joint, Label label) {
    auto any = [&](std::initializer_list<Label> ls) {
        return std::find(ls.begin(), ls.end(), label) != ls.end();
    };
    switch (joint) {
        case Joint::Nose:
        case Joint::LeftEye:
        case Joint::RightEye:
        case Joint::LeftEar:
        case Joint::RightEar:
            return any({Label::Face, Label::Hair});
        case Joint::Neck:
            return any({Label::Neck, Label::TopClothes, Label::Face, Label::Hair});
        case Joint::LeftShoulder:
        case Joint::RightShoulder:
            return any({Label::TopClothes, Label::LeftArm, Label::RightArm});
        case Joint::LeftElbow:
            return any({Label::LeftArm, Label::TopClothes});
        case Joint::RightElbow:
            return any({Label::RightArm, Label::TopClothes});
        case Joint::LeftWrist:
            return any({Label::LeftHand, Label::LeftArm});
        case Joint::RightWrist:
            return any({Label::RightHand, Label::RightArm});
        case Joint::LeftHip:
        case Joint::RightHip:
            return any({Label::Pants, Label::TopClothes, Label::LeftHand, Label::RightHand,
                        Label::LeftArm, Label::RightArm});
        case Joint::LeftKnee:
        case Joint::RightKnee:
            return any({Label::Pants, Label::LeftLeg, Label::RightLeg});
        case Joint::LeftAnkle:
            return any({Label::LeftLeg, Label::LeftShoe});
        case Joint::RightAnkle:
            return any({Label::RightLeg, Label::RightShoe});
    }
    return false;
}

Triplet generate_synthetic_triplet(uint64_t seed, int64_t height, int64_t width,
                                   std::optional<TextureStyle> style) {
    if (height < 64 || width < 16 || height % 16 != 0 || width % 16 != 0) {
        throw std::invalid_argument("generate_synthetic_triplet: dims must be multiples of 16 with H >= 64, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    Rng rng(seed);
    const Appearance look = sample_appearance(rng, style);
    const Pose source_pose = random_pose(rng, static_cast<double>(width));
    const Pose target_pose = jitter_pose(canonical_pose(look.style), rng, static_cast<double>(width));

    Triplet t;
    t.id = "t" + std::to_string(seed);
    t.style = static_cast<int>(look.style);
    render_garment(look, height, width, t.clothing, t.clothing_mask);
    t.source = render_person(source_pose, look, height, width);
    t.target = render_person(target_pose, look, height, width);
    return t;
}

}  // namespace tryon
