#include "profpipe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#ifdef PROFPIPE_HAVE_PNG
#include <png.h>
#endif

namespace profpipe {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h * 3), 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[static_cast<std::size_t>((y * w_ + x) * 3)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int x = x0; x <= x1; ++x) {
      set(x, y0, c);
      set(x, y1, c);
    }
    for (int y = y0; y <= y1; ++y) {
      set(x0, y, c);
      set(x1, y, c);
    }
  }

  // Polyline with a repeating on/off pattern measured in pixels along the path.
  void polyline(const std::vector<std::pair<double, double>>& pts, Rgb c, double on, double off) {
    double travelled = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const auto [x0, y0] = pts[i - 1];
      const auto [x1, y1] = pts[i];
      const double len = std::hypot(x1 - x0, y1 - y0);
      const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
      for (int k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        const double d = travelled + t * len;
        if (off > 0.0 && std::fmod(d, on + off) >= on) continue;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        set(x, y, c);
        set(x + 1, y, c);
        set(x, y + 1, c);
        set(x + 1, y + 1, c);
      }
      travelled += len;
    }
  }

  int width() const { return w_; }
  int height() const { return h_; }
  const std::vector<std::uint8_t>& pixels() const { return px_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

constexpr Rgb kAxis{90, 90, 90};
constexpr Rgb kGrid{225, 225, 225};
constexpr Rgb kTotal{20, 20, 20};
constexpr Rgb kProf{31, 119, 180};
constexpr Rgb kScen{214, 95, 20};

struct Series {
  std::vector<std::optional<double>> values;
  Rgb color;
  double on, off;
};

void draw_panel(Canvas& canvas, int left, int top, int w, int h, const std::vector<Series>& series, double y_max,
                std::size_t epochs) {
  for (int g = 1; g < 5; ++g) {
    const int y = top + h - g * h / 5;
    for (int x = left; x <= left + w; ++x) canvas.set(x, y, kGrid);
  }
  canvas.rect(left, top, left + w, top + h, kAxis);
  const auto to_x = [&](std::size_t e) {
    return epochs <= 1 ? left + w / 2.0 : left + static_cast<double>(e) * w / static_cast<double>(epochs - 1);
  };
  const auto to_y = [&](double v) { return top + h - v / y_max * h; };
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t e = 0; e < s.values.size(); ++e) {
      if (s.values[e]) pts.emplace_back(to_x(e), to_y(*s.values[e]));
    }
    if (pts.size() == 1) pts.push_back(pts.front());
    if (!pts.empty()) canvas.polyline(pts, s.color, s.on, s.off);
  }
}

}  // namespace

bool loss_plot_supported() {
#ifdef PROFPIPE_HAVE_PNG
  return true;
#else
  return false;
#endif
}

void render_loss_plot(const LossCurves& curves, const std::filesystem::path& png_path) {
  if (curves.empty()) throw ValidationError("render_loss_plot: no epochs recorded");
  std::vector<Series> train{{{}, kTotal, 1.0, 0.0}, {{}, kProf, 10.0, 6.0}, {{}, kScen, 1.0, 7.0}};
  std::vector<Series> val = train;
  double y_max = 0.0;
  const auto push = [&](Series& s, const std::optional<double>& v) {
    s.values.push_back(v);
    if (v && std::isfinite(*v)) y_max = std::max(y_max, *v);
  };
  for (const auto& r : curves.epochs) {
    push(train[0], r.train_total);
    push(train[1], r.train_prof);
    push(train[2], r.train_scen);
    push(val[0], r.val_total);
    push(val[1], r.val_prof);
    push(val[2], r.val_scen);
  }
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.05;

  Canvas canvas(960, 400);
  draw_panel(canvas, 50, 30, 400, 320, train, y_max, curves.size());
  draw_panel(canvas, 530, 30, 400, 320, val, y_max, curves.size());

#ifdef PROFPIPE_HAVE_PNG
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(canvas.width());
  image.height = static_cast<png_uint_32>(canvas.height());
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, png_path.c_str(), 0, canvas.pixels().data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write " + png_path.string() + ": " + msg);
  }
#else
  throw IoError("built without libpng; cannot write " + png_path.string());
#endif
}

}  // namespace profpipe
