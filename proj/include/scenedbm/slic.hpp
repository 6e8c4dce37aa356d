#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "scenedbm/image.hpp"
#include "scenedbm/linalg.hpp"

namespace scenedbm {

struct ClusterCenter {
    double l = 0.0, a = 0.0, b = 0.0;
    double x = 0.0, y = 0.0;
    int count = 0;
};

struct SlicConfig {
    int k = 100;                      // desired superpixel count
    double compactness = 10.0;        // m
    double residual_threshold = 1.0;  // L1 bound on center motion
    int max_iters = 10;
    bool random_jitter = false;       // jitter seeds inside their cell
    std::uint64_t seed = 0;

    void validate(int total_pixels) const {
        require(k >= 1, "slic: k must be >= 1");
        require(k <= total_pixels, "more superpixels than pixels");
        require(compactness > 0.0, "slic: compactness must be > 0");
        require(residual_threshold >= 0.0, "slic: residual_threshold must be >= 0");
        require(max_iters >= 1, "slic: max_iters must be >= 1");
    }
};

struct SuperpixelMap {
    int width = 0;
    int height = 0;
    std::vector<int> labels;  // row-major, [0, centers.size())
    std::vector<ClusterCenter> centers;
    int iterations_used = 0;
    double final_residual = 0.0;
};

inline double slic_region_size(int total_pixels, int k) {
    return std::sqrt(static_cast<double>(total_pixels) / k);
}

// One seed per SxS grid cell, at the cell midpoint (optionally jittered).
inline std::vector<ClusterCenter> init_centers(const LabImage& lab, const SlicConfig& cfg) {
    const int n = lab.width * lab.height;
    cfg.validate(n);
    const double s = slic_region_size(n, cfg.k);
    const int nx = static_cast<int>(std::ceil(lab.width / s));
    const int ny = static_cast<int>(std::ceil(lab.height / s));
    Rng rng(cfg.seed);
    std::vector<ClusterCenter> centers;
    centers.reserve(static_cast<std::size_t>(nx) * ny);
    for (int gy = 0; gy < ny; ++gy) {
        for (int gx = 0; gx < nx; ++gx) {
            double cx = (gx + 0.5) * s;
            double cy = (gy + 0.5) * s;
            if (cfg.random_jitter) {
                cx = gx * s + rng.uniform() * s;
                cy = gy * s + rng.uniform() * s;
            }
            const int px = std::min(lab.width - 1, static_cast<int>(cx));
            const int py = std::min(lab.height - 1, static_cast<int>(cy));
            ClusterCenter c;
            const LabPixel& p = lab.at(px, py);
            c.l = p.l;
            c.a = p.a;
            c.b = p.b;
            c.x = px;
            c.y = py;
            centers.push_back(c);
        }
    }
    return centers;
}

namespace detail {

// Squared Lab gradient at (x, y): horizontal plus vertical central
// differences, neighbors clamped at the border.
inline double lab_gradient(const LabImage& lab, int x, int y) {
    const int xl = std::max(0, x - 1), xr = std::min(lab.width - 1, x + 1);
    const int yu = std::max(0, y - 1), yd = std::min(lab.height - 1, y + 1);
    const LabPixel &h0 = lab.at(xl, y), &h1 = lab.at(xr, y);
    const LabPixel &v0 = lab.at(x, yu), &v1 = lab.at(x, yd);
    const double dhl = h1.l - h0.l, dha = h1.a - h0.a, dhb = h1.b - h0.b;
    const double dvl = v1.l - v0.l, dva = v1.a - v0.a, dvb = v1.b - v0.b;
    return dhl * dhl + dha * dha + dhb * dhb + dvl * dvl + dva * dva + dvb * dvb;
}

}  // namespace detail

// Move a seed to the lowest-gradient pixel in its 3x3 neighborhood.
// Ties go to the first candidate in row-major scan order.
inline ClusterCenter perturb_to_lowest_gradient(const ClusterCenter& center, const LabImage& lab) {
    const int cx = static_cast<int>(center.x);
    const int cy = static_cast<int>(center.y);
    require(cx >= 0 && cx < lab.width && cy >= 0 && cy < lab.height,
            "perturb: center outside the image");
    int bx = cx, by = cy;
    double best = std::numeric_limits<double>::infinity();
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const int x = cx + dx, y = cy + dy;
            if (x < 0 || x >= lab.width || y < 0 || y >= lab.height) continue;
            const double g = detail::lab_gradient(lab, x, y);
            if (g < best) {
                best = g;
                bx = x;
                by = y;
            }
        }
    }
    ClusterCenter out = center;
    const LabPixel& p = lab.at(bx, by);
    out.l = p.l;
    out.a = p.a;
    out.b = p.b;
    out.x = bx;
    out.y = by;
    return out;
}

// Combined color/spatial distance: D = sqrt(dc^2 + (ds/S)^2 m^2).
inline double slic_distance(const LabPixel& p, double px, double py, const ClusterCenter& c,
                            double s, double m) {
    const double dl = p.l - c.l, da = p.a - c.a, db = p.b - c.b;
    const double dc2 = dl * dl + da * da + db * db;
    const double dx = px - c.x, dy = py - c.y;
    const double ds2 = dx * dx + dy * dy;
    return std::sqrt(dc2 + ds2 / (s * s) * m * m);
}

struct AssignResult {
    std::vector<int> labels;  // -1 where no 2Sx2S window covered the pixel
    std::vector<ClusterCenter> centers;
    double residual = 0.0;
};

// One local k-means pass: windowed assignment, then center means and the
// L1 residual of center motion. Uncovered pixels keep label -1.
inline AssignResult assign_and_update(const LabImage& lab, const std::vector<ClusterCenter>& centers,
                                      const SlicConfig& cfg) {
    require(!centers.empty(), "assign_and_update: no centers");
    const int w = lab.width, h = lab.height;
    const double s = slic_region_size(w * h, cfg.k);
    const int half = std::max(1, static_cast<int>(std::lround(s)));

    std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);
    std::vector<double> best(static_cast<std::size_t>(w) * h,
                             std::numeric_limits<double>::infinity());

    for (std::size_t k = 0; k < centers.size(); ++k) {
        const ClusterCenter& c = centers[k];
        const int x0 = std::max(0, static_cast<int>(c.x) - half);
        const int x1 = std::min(w - 1, static_cast<int>(c.x) + half);
        const int y0 = std::max(0, static_cast<int>(c.y) - half);
        const int y1 = std::min(h - 1, static_cast<int>(c.y) + half);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const std::size_t idx = static_cast<std::size_t>(y) * w + x;
                const double d = slic_distance(lab.at(x, y), x, y, c, s, cfg.compactness);
                if (d < best[idx]) {  // strict: ties stay with the lower index
                    best[idx] = d;
                    labels[idx] = static_cast<int>(k);
                }
            }
        }
    }

    std::vector<ClusterCenter> fresh(centers.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int lb = labels[static_cast<std::size_t>(y) * w + x];
            if (lb < 0) continue;
            ClusterCenter& c = fresh[static_cast<std::size_t>(lb)];
            const LabPixel& p = lab.at(x, y);
            c.l += p.l;
            c.a += p.a;
            c.b += p.b;
            c.x += x;
            c.y += y;
            c.count += 1;
        }
    }

    double residual = 0.0;
    for (std::size_t k = 0; k < fresh.size(); ++k) {
        if (fresh[k].count == 0) {
            fresh[k] = centers[k];  // empty this pass; keep the old center
            fresh[k].count = 0;
            continue;
        }
        const double inv = 1.0 / fresh[k].count;
        fresh[k].l *= inv;
        fresh[k].a *= inv;
        fresh[k].b *= inv;
        fresh[k].x *= inv;
        fresh[k].y *= inv;
        residual += std::abs(fresh[k].x - centers[k].x) + std::abs(fresh[k].y - centers[k].y);
    }
    return {std::move(labels), std::move(fresh), residual};
}

// Merges stray components (smaller than S*S/4, or unassigned) into the
// 4-adjacent component with the largest shared boundary; ties go to the
// lowest label. Keeps the largest component of each label; oversized
// disconnected remnants get fresh labels.
inline std::vector<int> enforce_connectivity(std::vector<int> labels, int width, int height,
                                             double region_size) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    const int min_size = std::max(1, static_cast<int>(region_size * region_size / 4.0));

    // connected components over equal labels (label -1 included)
    std::vector<int> comp(n, -1);
    std::vector<int> comp_label;
    std::vector<int> comp_size;
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (comp[i] >= 0) continue;
        const int id = static_cast<int>(comp_label.size());
        const int lb = labels[i];
        comp_label.push_back(lb);
        comp_size.push_back(0);
        stack.clear();
        stack.push_back(i);
        comp[i] = id;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++comp_size[id];
            const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
            const int nx[4] = {x - 1, x + 1, x, x};
            const int ny[4] = {y, y, y - 1, y + 1};
            for (int d = 0; d < 4; ++d) {
                if (nx[d] < 0 || nx[d] >= width || ny[d] < 0 || ny[d] >= height) continue;
                const std::size_t q = static_cast<std::size_t>(ny[d]) * width + nx[d];
                if (comp[q] < 0 && labels[q] == lb) {
                    comp[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }

    // the largest component of each label survives under its label
    std::map<int, int> main_comp;  // label -> component id
    for (std::size_t id = 0; id < comp_label.size(); ++id) {
        const int lb = comp_label[id];
        if (lb < 0) continue;
        auto it = main_comp.find(lb);
        if (it == main_comp.end() || comp_size[id] > comp_size[static_cast<std::size_t>(it->second)])
            main_comp[lb] = static_cast<int>(id);
    }

    int next_label = 0;
    for (std::size_t id = 0; id < comp_label.size(); ++id)
        next_label = std::max(next_label, comp_label[id] + 1);

    std::vector<int> final_label(comp_label.size(), -2);  // -2 = undecided stray
    for (std::size_t id = 0; id < comp_label.size(); ++id) {
        const int lb = comp_label[id];
        if (lb < 0 || comp_size[id] < min_size) continue;  // stray, merged below
        if (main_comp[lb] == static_cast<int>(id)) {
            final_label[id] = lb;
        } else {
            final_label[id] = next_label++;  // big detached remnant becomes its own superpixel
        }
    }

    // degenerate case: every component is under the size floor; anchor the
    // largest one so the strays have somewhere to merge
    if (std::find_if(final_label.begin(), final_label.end(), [](int v) { return v >= 0; }) ==
        final_label.end()) {
        std::size_t biggest = 0;
        for (std::size_t id = 1; id < comp_size.size(); ++id)
            if (comp_size[id] > comp_size[biggest]) biggest = id;
        final_label[biggest] = std::max(0, comp_label[biggest]);
    }

    // strays: merge into the neighbor component with the largest shared
    // boundary; repeat until everything is placed (stray chains resolve
    // once a neighbor gets a final label)
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t id = 0; id < comp_label.size(); ++id) {
            if (final_label[id] != -2) continue;
            std::map<int, int> boundary;  // neighbor final label -> shared edge count
            for (std::size_t i = 0; i < n; ++i) {
                if (comp[i] != static_cast<int>(id)) continue;
                const int x = static_cast<int>(i % width), y = static_cast<int>(i / width);
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int d = 0; d < 4; ++d) {
                    if (nx[d] < 0 || nx[d] >= width || ny[d] < 0 || ny[d] >= height) continue;
                    const std::size_t q = static_cast<std::size_t>(ny[d]) * width + nx[d];
                    const int nl = final_label[static_cast<std::size_t>(comp[q])];
                    if (comp[q] != static_cast<int>(id) && nl >= 0) ++boundary[nl];
                }
            }
            if (boundary.empty()) continue;
            int target = -1, most = -1;
            for (const auto& [lbl, cnt] : boundary) {
                if (cnt > most) {  // map iterates ascending, so ties keep the lowest label
                    most = cnt;
                    target = lbl;
                }
            }
            final_label[id] = target;
            progress = true;
        }
    }

    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = final_label[static_cast<std::size_t>(comp[i])];
    return out;
}

namespace detail {

// Relabel densely to [0, K') and rebuild centers as member means.
inline SuperpixelMap finalize_map(const LabImage& lab, std::vector<int> labels, int iterations,
                                  double residual) {
    std::map<int, int> remap;
    for (int lb : labels)
        if (!remap.count(lb)) remap.emplace(lb, 0);
    int next = 0;
    for (auto& [old_label, fresh] : remap) fresh = next++;

    SuperpixelMap map;
    map.width = lab.width;
    map.height = lab.height;
    map.iterations_used = iterations;
    map.final_residual = residual;
    map.labels.resize(labels.size());
    map.centers.assign(static_cast<std::size_t>(next), {});
    for (int y = 0; y < lab.height; ++y) {
        for (int x = 0; x < lab.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * lab.width + x;
            const int lb = remap[labels[i]];
            map.labels[i] = lb;
            ClusterCenter& c = map.centers[static_cast<std::size_t>(lb)];
            const LabPixel& p = lab.at(x, y);
            c.l += p.l;
            c.a += p.a;
            c.b += p.b;
            c.x += x;
            c.y += y;
            c.count += 1;
        }
    }
    for (ClusterCenter& c : map.centers) {
        const double inv = 1.0 / c.count;
        c.l *= inv;
        c.a *= inv;
        c.b *= inv;
        c.x *= inv;
        c.y *= inv;
    }
    return map;
}

}  // namespace detail

inline SuperpixelMap run_slic(const LabImage& lab, const SlicConfig& cfg) {
    const int n = lab.width * lab.height;
    cfg.validate(n);
    const double s = slic_region_size(n, cfg.k);

    std::vector<ClusterCenter> centers = init_centers(lab, cfg);
    for (ClusterCenter& c : centers) c = perturb_to_lowest_gradient(c, lab);

    std::vector<int> labels;
    double residual = 0.0;
    int iters = 0;
    for (; iters < cfg.max_iters; ++iters) {
        AssignResult r = assign_and_update(lab, centers, cfg);
        labels = std::move(r.labels);
        centers = std::move(r.centers);
        residual = r.residual;
        if (residual < cfg.residual_threshold) {
            ++iters;
            break;
        }
    }

    labels = enforce_connectivity(std::move(labels), lab.width, lab.height, s);
    return detail::finalize_map(lab, std::move(labels), iters, residual);
}

inline SuperpixelMap run_slic(const Image& image, const SlicConfig& cfg) {
    return run_slic(rgb_to_lab(image), cfg);
}

// Each grid cell takes the normalized mean luminance (l/100) of the
// superpixel whose center is nearest the cell's image-space midpoint.
inline Vec superpixels_to_grid(const SuperpixelMap& map, int grid_w, int grid_h) {
    require(!map.centers.empty(), "superpixels_to_grid: empty superpixel map");
    require(grid_w >= 1 && grid_h >= 1, "superpixels_to_grid: bad grid shape");
    Vec out(static_cast<std::size_t>(grid_w) * grid_h);
    for (int gy = 0; gy < grid_h; ++gy) {
        for (int gx = 0; gx < grid_w; ++gx) {
            const double mx = (gx + 0.5) * map.width / grid_w;
            const double my = (gy + 0.5) * map.height / grid_h;
            std::size_t nearest = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < map.centers.size(); ++k) {
                const double dx = map.centers[k].x - mx, dy = map.centers[k].y - my;
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    nearest = k;
                }
            }
            out[static_cast<std::size_t>(gy) * grid_w + gx] =
                std::clamp(map.centers[nearest].l / 100.0, 0.0, 1.0);
        }
    }
    return out;
}

// `SLICLABELS v1` text format: header line, dims + cluster count, then
// row-major labels one image row per line.
inline void write_label_map(std::ostream& out, const SuperpixelMap& map) {
    out << "SLICLABELS v1\n" << map.width << " " << map.height << " " << map.centers.size() << "\n";
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            if (x) out << ' ';
            out << map.labels[static_cast<std::size_t>(y) * map.width + x];
        }
        out << '\n';
    }
}

inline void write_label_map(const std::string& path, const SuperpixelMap& map) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write label map: " + path);
    write_label_map(out, map);
}

}  // namespace scenedbm
