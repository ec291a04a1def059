#pragma once

#include "vistra/io/pnm.hpp"
#include "vistra/runtime/factory.hpp"

namespace vistra {

// Appendix-style visualizations, emitted as binary PGM with min-max
// normalization per image.

// For each patch, the cosine similarity of its position embedding to every
// other patch's, tiled into one (h*h) x (w*w) grayscale image.
template <typename T>
std::vector<double> possim_image(const Tensor<T>& table, int64_t grid_h, int64_t grid_w) {
    const int64_t l = table.shape[0], c = table.shape[1];
    if (l != grid_h * grid_w) fail_shape("possim: table rows ", l, " vs grid ", grid_h, "x", grid_w);
    const T* p = table.ptr();
    std::vector<double> norms(static_cast<size_t>(l));
    for (int64_t i = 0; i < l; ++i) {
        double n = 0;
        for (int64_t j = 0; j < c; ++j) n += double(p[i * c + j]) * double(p[i * c + j]);
        norms[size_t(i)] = std::sqrt(n);
    }
    std::vector<double> img(static_cast<size_t>(l * l));
    for (int64_t a = 0; a < l; ++a)
        for (int64_t b = 0; b < l; ++b) {
            double dot = 0;
            for (int64_t j = 0; j < c; ++j) dot += double(p[a * c + j]) * double(p[b * c + j]);
            const double denom = norms[size_t(a)] * norms[size_t(b)];
            const double sim = denom > 0 ? dot / denom : 0.0;
            // tile (ar, ac) holds the similarity map of patch a
            const int64_t ar = a / grid_w, ac = a % grid_w;
            const int64_t br = b / grid_w, bc = b % grid_w;
            img[size_t((ar * grid_h + br) * (grid_w * grid_w) + (ac * grid_w + bc))] = sim;
        }
    return img;
}

struct VisualizeRequest {
    std::string what;  // pos-sim | attention | features
    int64_t layer = 1;  // 1-based
    int64_t head = 1;   // 1-based
    int64_t point_r = 0, point_c = 0;
    int64_t image_index = 0;
};

// Runs one visualization and writes the image file; returns the path.
inline std::string run_visualization(BuiltModel& model, const RunConfig& cfg, const VisualizeRequest& req,
                                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    if (req.what == "pos-sim") {
        if (!model.is_setr()) throw ConfigError("pos-sim requires a setr model (learned position table)");
        const auto& enc = model.setr->encoder();
        auto img = possim_image(enc.pos_table, enc.cfg.tokens_per_side(), enc.cfg.tokens_per_side());
        const int64_t side = enc.cfg.tokens_per_side();
        const std::string path = out_dir + "/possim.pgm";
        write_pgm(path, side * side, side * side, normalize_to_bytes(img));
        return path;
    }

    // forward an input sample
    auto corpus = corpus_from_config(cfg, model);
    if (req.image_index < 0 || req.image_index >= int64_t(corpus.size()))
        throw ConfigError(strcat_all("visualize: image index ", req.image_index, " outside corpus of ",
                                     corpus.size()));
    const auto& sample = corpus[size_t(req.image_index)];
    RunContext ctx;
    NoGradScope<float> nograd;

    if (req.what == "attention") {
        if (!model.is_setr()) throw ConfigError("attention maps are available for setr models");
        std::vector<Tensor<float>> attn;
        auto zs = model.setr->encode(sample.image, &attn);
        const auto& c = model.setr->config();
        if (req.layer < 1 || req.layer > c.layers)
            throw ConfigError(strcat_all("visualize: layer ", req.layer, " outside [1, ", c.layers, "]"));
        if (req.head < 1 || req.head > c.heads)
            throw ConfigError(strcat_all("visualize: head ", req.head, " outside [1, ", c.heads, "]"));
        const int64_t gh = zs[0].grid_h, gw = zs[0].grid_w;
        if (req.point_r < 0 || req.point_r >= gh || req.point_c < 0 || req.point_c >= gw)
            throw ConfigError(strcat_all("visualize: query point (", req.point_r, ", ", req.point_c,
                                         ") outside the ", gh, "x", gw, " token grid"));
        const auto& a = attn[size_t(req.layer - 1)];  // [m, L, L]
        const int64_t l = a.shape[1];
        const int64_t query = req.point_r * gw + req.point_c;
        std::vector<double> row(static_cast<size_t>(l));
        double sum = 0;
        for (int64_t j = 0; j < l; ++j) {
            row[size_t(j)] = double((*a.data)[size_t(((req.head - 1) * l + query) * l + j)]);
            sum += row[size_t(j)];
        }
        if (std::fabs(sum - 1.0) > 1e-4)
            throw NumericError(strcat_all("attention row sums to ", sum, ", expected 1"));
        const std::string path = strcat_all(out_dir, "/attention_l", req.layer, "_h", req.head, "_r",
                                            req.point_r, "_c", req.point_c, ".pgm");
        write_pgm(path, gw, gh, normalize_to_bytes(row));
        return path;
    }

    if (req.what == "features") {
        std::vector<double> mean_map;
        int64_t gh = 0, gw = 0;
        if (model.is_setr()) {
            auto zs = model.setr->encode(sample.image);
            const auto& c = model.setr->config();
            if (req.layer < 1 || req.layer > c.layers)
                throw ConfigError(strcat_all("visualize: layer ", req.layer, " outside [1, ", c.layers, "]"));
            const auto& z = zs[size_t(req.layer - 1)];
            gh = z.grid_h;
            gw = z.grid_w;
            mean_map.assign(size_t(gh * gw), 0.0);
            const int64_t c_dim = z.channels();
            for (int64_t i = 0; i < gh * gw; ++i) {
                double m = 0;
                for (int64_t j = 0; j < c_dim; ++j) m += double((*z.tokens.data)[size_t(i * c_dim + j)]);
                mean_map[size_t(i)] = m / double(c_dim);
            }
        } else {
            if (req.layer < 1 || req.layer > 4)
                throw ConfigError("visualize: hlg feature stage must be in [1, 4]");
            auto pyramid = model.hlg->forward_features(sample.image, ctx);
            const auto& f = pyramid[size_t(req.layer - 1)];
            gh = f.shape[0];
            gw = f.shape[1];
            const int64_t c_dim = f.shape[2];
            mean_map.assign(size_t(gh * gw), 0.0);
            for (int64_t i = 0; i < gh * gw; ++i) {
                double m = 0;
                for (int64_t j = 0; j < c_dim; ++j) m += double((*f.data)[size_t(i * c_dim + j)]);
                mean_map[size_t(i)] = m / double(c_dim);
            }
        }
        const std::string path = strcat_all(out_dir, "/features_l", req.layer, ".pgm");
        write_pgm(path, gw, gh, normalize_to_bytes(mean_map));
        return path;
    }

    throw ConfigError("visualize: unknown --what '" + req.what + "' (pos-sim|attention|features)");
}

}  // namespace vistra
