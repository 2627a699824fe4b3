#include "bgest/error.hpp"
#include "bgest/evalkit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace bgest {

namespace {

using nlohmann::json;

const char* texture_name(OccluderTexture t) {
    switch (t) {
        case OccluderTexture::flat: return "flat";
        case OccluderTexture::noise: return "noise";
        case OccluderTexture::stripes: return "stripes";
        case OccluderTexture::checker: return "checker";
    }
    return "noise";
}

OccluderTexture texture_from_name(const std::string& s) {
    if (s == "flat") return OccluderTexture::flat;
    if (s == "noise") return OccluderTexture::noise;
    if (s == "stripes") return OccluderTexture::stripes;
    if (s == "checker") return OccluderTexture::checker;
    throw ConfigError("unknown occluder texture '" + s + "'");
}

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Occluder appearance in its own coordinates; fixed for the whole sequence.
GreyImage occluder_texture(const Occluder& o) {
    GreyImage tex(o.width, o.height);
    std::mt19937_64 rng(o.texture_seed);
    std::uniform_int_distribution<int> spread(-60, 60);
    for (int y = 0; y < o.height; ++y) {
        for (int x = 0; x < o.width; ++x) {
            double v = o.intensity;
            switch (o.texture) {
                case OccluderTexture::flat: break;
                case OccluderTexture::noise: v += spread(rng); break;
                case OccluderTexture::stripes: v -= ((x / 4) % 2) * 80; break;
                case OccluderTexture::checker: v -= (((x / 8) + (y / 8)) % 2) * 80; break;
            }
            tex.at(x, y) = clamp_u8(v);
        }
    }
    return tex;
}

}  // namespace

std::pair<int, int> Occluder::position(int frame) const {
    const double t = static_cast<double>(frame - first_frame);
    return {x + static_cast<int>(std::lround(vx * t)), y + static_cast<int>(std::lround(vy * t))};
}

void SynthSpec::validate() const {
    if (width < 1 || height < 1) throw ConfigError("synth: frame size must be positive");
    if (frame_count < 1) throw ConfigError("synth: frame_count must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
    if (!(fps > 0.0)) throw ConfigError("synth: fps must be > 0");
    if (background && (background->width != width || background->height != height)) {
        throw ConfigError("synth: background image geometry does not match width/height");
    }
    for (std::size_t i = 0; i < occluders.size(); ++i) {
        const auto& o = occluders[i];
        const std::string tag = "synth: occluder " + std::to_string(i);
        if (o.width < 1 || o.height < 1) throw ConfigError(tag + " has non-positive size");
        if (o.first_frame < 1 || o.last_frame > frame_count || o.first_frame > o.last_frame) {
            throw ConfigError(tag + " dwell interval outside [1, frame_count]");
        }
        for (int f = o.first_frame; f <= o.last_frame; ++f) {
            const auto [px, py] = o.position(f);
            if (px < 0 || py < 0 || px + o.width > width || py + o.height > height) {
                throw ConfigError(tag + " leaves the frame at frame " + std::to_string(f));
            }
        }
    }
}

GreyImage textured_background(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Wave {
        double kx, ky, phase, amp;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 5; ++i) {
        const double wavelength = 28.0 + 60.0 * unit(rng);
        const double angle = std::numbers::pi * unit(rng);
        const double k = 2.0 * std::numbers::pi / wavelength;
        waves.push_back({k * std::cos(angle), k * std::sin(angle), 2.0 * std::numbers::pi * unit(rng),
                         10.0 + 15.0 * unit(rng)});
    }
    const double gx = 0.15 + 0.2 * unit(rng);
    const double gy = 0.1 + 0.2 * unit(rng);

    std::vector<double> field(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double v = gx * x + gy * y;
            for (const auto& w : waves) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
            field[static_cast<std::size_t>(y) * width + x] = v;
        }
    }
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    const double span = std::max(*hi - *lo, 1e-9);
    GreyImage out(width, height);
    for (std::size_t i = 0; i < field.size(); ++i) out.pixels[i] = clamp_u8(40.0 + 170.0 * (field[i] - *lo) / span);
    return out;
}

SynthOutput synth_sequence(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    SynthOutput out;
    out.truth = spec.background ? *spec.background : textured_background(spec.width, spec.height, spec.background_seed);
    out.frames.width = spec.width;
    out.frames.height = spec.height;
    out.frames.fps = spec.fps;
    out.frames.frames.reserve(static_cast<std::size_t>(spec.frame_count));
    out.masks.reserve(static_cast<std::size_t>(spec.frame_count));

    std::vector<GreyImage> textures;
    for (const auto& o : spec.occluders) textures.push_back(occluder_texture(o));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);

    for (int f = 1; f <= spec.frame_count; ++f) {
        GreyImage clean = out.truth;
        Mask mask(spec.width, spec.height);
        for (std::size_t i = 0; i < spec.occluders.size(); ++i) {
            const auto& o = spec.occluders[i];
            if (f < o.first_frame || f > o.last_frame) continue;
            const auto [px, py] = o.position(f);
            for (int y = 0; y < o.height; ++y) {
                for (int x = 0; x < o.width; ++x) {
                    clean.at(px + x, py + y) = textures[i].at(x, y);
                    mask.set(px + x, py + y, true);
                }
            }
        }
        if (spec.noise_sigma > 0.0) {
            for (auto& p : clean.pixels) p = clamp_u8(p + noise(rng));
        }
        out.frames.frames.push_back(std::move(clean));
        out.masks.push_back(std::move(mask));
    }
    return out;
}

SynthSpec synth_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec is not valid JSON: ") + e.what());
    }
    SynthSpec s;
    try {
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.frame_count = j.value("frame_count", s.frame_count);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.fps = j.value("fps", s.fps);
        s.background_seed = j.value("background_seed", s.background_seed);
        if (j.contains("background_file")) s.background = read_image(j.at("background_file").get<std::string>());
        for (const auto& jo : j.value("occluders", json::array())) {
            Occluder o;
            o.x = jo.at("x").get<int>();
            o.y = jo.at("y").get<int>();
            o.width = jo.at("width").get<int>();
            o.height = jo.at("height").get<int>();
            o.texture = texture_from_name(jo.value("texture", std::string("noise")));
            o.intensity = jo.value("intensity", o.intensity);
            o.first_frame = jo.value("first_frame", 1);
            o.last_frame = jo.value("last_frame", s.frame_count);
            o.vx = jo.value("vx", 0.0);
            o.vy = jo.value("vy", 0.0);
            o.texture_seed = jo.value("texture_seed", std::uint64_t{1});
            s.occluders.push_back(o);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
    json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["frame_count"] = spec.frame_count;
    j["noise_sigma"] = spec.noise_sigma;
    j["fps"] = spec.fps;
    j["background_seed"] = spec.background_seed;
    j["occluders"] = json::array();
    for (const auto& o : spec.occluders) {
        j["occluders"].push_back({{"x", o.x},
                                  {"y", o.y},
                                  {"width", o.width},
                                  {"height", o.height},
                                  {"texture", texture_name(o.texture)},
                                  {"intensity", o.intensity},
                                  {"first_frame", o.first_frame},
                                  {"last_frame", o.last_frame},
                                  {"vx", o.vx},
                                  {"vy", o.vy},
                                  {"texture_seed", o.texture_seed}});
    }
    return j.dump(2);
}

SynthSpec stationary_occluder_spec() {
    SynthSpec s;
    s.width = 320;
    s.height = 240;
    s.frame_count = 450;
    s.noise_sigma = 1.0;
    s.background_seed = 7;
    Occluder person;
    person.x = 136;
    person.y = 72;
    person.width = 64;
    person.height = 96;
    person.texture = OccluderTexture::noise;
    person.intensity = 190;
    person.first_frame = 1;
    person.last_frame = 350;
    person.texture_seed = 11;
    s.occluders.push_back(person);
    return s;
}

SynthSpec bootstrap_spec() {
    SynthSpec s;
    s.width = 160;
    s.height = 128;
    s.frame_count = 200;
    s.noise_sigma = 1.0;
    s.background_seed = 21;
    auto add = [&](int x, int y, double vx, double vy, OccluderTexture tex, int intensity, std::uint64_t seed) {
        Occluder o;
        o.x = x;
        o.y = y;
        o.width = 28;
        o.height = 36;
        o.vx = vx;
        o.vy = vy;
        o.texture = tex;
        o.intensity = intensity;
        o.first_frame = 1;
        o.last_frame = s.frame_count;
        o.texture_seed = seed;
        s.occluders.push_back(o);
    };
    add(2, 4, 0.6, 0.0, OccluderTexture::noise, 200, 101);
    add(128, 48, -0.6, 0.0, OccluderTexture::checker, 230, 102);
    add(20, 2, 0.2, 0.4, OccluderTexture::stripes, 60, 103);
    add(100, 88, -0.3, -0.2, OccluderTexture::noise, 90, 104);
    return s;
}

}  // namespace bgest
