#pragma once

#include <iomanip>

#include "vistra/hlg/config.hpp"
#include "vistra/setr/config.hpp"

namespace vistra {

// Closed-form parameter and multiply-accumulate accounting. The op cost
// model matches what the instrumented kernels count: matmuls and convs only
// (norms, softmax, activations, pooling and resizing are excluded). FLOPs
// are reported as 2 x MACs; the published comparison tables follow the
// 1 x MAC convention, so audits compare against `macs`.
struct CostRow {
    std::string name;
    int64_t params = 0;
    uint64_t macs = 0;
};

struct CostReport {
    std::string model;
    int64_t input = 0;
    std::vector<CostRow> rows;

    int64_t total_params() const {
        int64_t t = 0;
        for (const auto& r : rows) t += r.params;
        return t;
    }
    uint64_t total_macs() const {
        uint64_t t = 0;
        for (const auto& r : rows) t += r.macs;
        return t;
    }
    uint64_t total_flops() const { return 2 * total_macs(); }

    std::string to_text() const {
        std::ostringstream os;
        os << "model: " << model << "  input: " << input << "x" << input << "\n";
        os << "convention: FLOPs = 2 x multiply-accumulates; the 'table' column\n";
        os << "is the 1 x MAC count used by published comparison tables.\n";
        os << std::left << std::setw(24) << "module" << std::right << std::setw(14) << "params"
           << std::setw(16) << "FLOPs" << std::setw(16) << "table" << "\n";
        for (const auto& r : rows) {
            os << std::left << std::setw(24) << r.name << std::right << std::setw(14) << r.params
               << std::setw(16) << 2 * r.macs << std::setw(16) << r.macs << "\n";
        }
        os << std::left << std::setw(24) << "total" << std::right << std::setw(14) << total_params()
           << std::setw(16) << total_flops() << std::setw(16) << total_macs() << "\n";
        return os.str();
    }

    std::string to_kv() const {
        std::ostringstream os;
        os << "model=" << model << "\ninput=" << input << "\n";
        os << "total_params=" << total_params() << "\ntotal_flops=" << total_flops()
           << "\ntotal_macs=" << total_macs() << "\n";
        for (const auto& r : rows)
            os << "module." << r.name << ".params=" << r.params << "\nmodule." << r.name << ".flops="
               << 2 * r.macs << "\nmodule." << r.name << ".macs=" << r.macs << "\n";
        return os.str();
    }
};

namespace cost {

inline int64_t linear_p(int64_t in, int64_t out) { return in * out + out; }
inline int64_t conv_p(int64_t kh, int64_t kw, int64_t cin_g, int64_t cout, bool bias = true) {
    return kh * kw * cin_g * cout + (bias ? cout : 0);
}
inline int64_t norm_p(int64_t c) { return 2 * c; }
inline uint64_t conv_m(int64_t oh, int64_t ow, int64_t kh, int64_t kw, int64_t cin_g, int64_t cout) {
    return uint64_t(oh * ow) * uint64_t(kh * kw) * uint64_t(cin_g) * uint64_t(cout);
}
inline int64_t conv_out(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// One HLG sub-layer (DWMLP at stride s + local/global attention), on an
// (ih, iw) input grid with c_in channels.
struct SubLayerCost {
    int64_t params = 0;
    uint64_t macs = 0;
    int64_t oh = 0, ow = 0;
};

inline SubLayerCost hlg_sublayer(int64_t ih, int64_t iw, int64_t c_in, int64_t c, int64_t hidden,
                                 int64_t stride, int64_t heads, int64_t r, int64_t d,
                                 int64_t native_gh, int64_t native_gw, const HlgConfig& cfg) {
    SubLayerCost out;
    const int64_t se = HlgConfig::se_width(c);
    out.oh = conv_out(ih, 3, stride, 1);
    out.ow = conv_out(iw, 3, stride, 1);
    const int64_t oh = out.oh, ow = out.ow;

    // DWMLP
    out.params += norm_p(c_in);                       // pre-norm
    out.params += conv_p(1, 1, c_in, hidden);         // expand
    out.params += conv_p(3, 3, 1, hidden);            // depth-wise
    out.params += linear_p(hidden, se) + linear_p(se, hidden);
    out.params += conv_p(1, 1, hidden, c);            // project
    out.macs += conv_m(ih, iw, 1, 1, c_in, hidden);
    out.macs += conv_m(oh, ow, 3, 3, 1, hidden);
    out.macs += uint64_t(hidden * se) * 2;
    out.macs += conv_m(oh, ow, 1, 1, hidden, c);

    // attention: shared projections, B_W / B_G tables, fixup
    out.params += 2 * norm_p(c);                      // local + global pre-norms
    out.params += 4 * linear_p(c, c);                 // W_Q, W_K, W_V, W_O
    out.params += heads * (2 * r - 1) * (2 * r - 1);  // B_W
    const int64_t nwh = ceil_div(native_gh, r), nww = ceil_div(native_gw, r);
    if (cfg.global_bias == GlobalBiasKind::Relative)
        out.params += heads * ((2 * nwh - 1) * r) * ((2 * nww - 1) * r);
    else
        out.params += heads * (native_gh * native_gw) * (nwh * nww);
    out.params += conv_p(3, 3, 1, c);                 // query fixup
    if (cfg.window_embed == WindowEmbedKind::DwConv) out.params += conv_p(r, r, 1, c);

    const int64_t span = r * d;
    const int64_t wins = (ceil_div(oh, span) * d) * (ceil_div(ow, span) * d);
    const int64_t s = r * r;
    const int64_t slots = wins * s;  // includes padded slots, as executed
    out.macs += 3 * uint64_t(slots) * uint64_t(c) * uint64_t(c);       // q, k, v
    out.macs += 2 * uint64_t(wins) * uint64_t(s) * uint64_t(s) * uint64_t(c);  // qk^T and attn*v
    out.macs += uint64_t(slots) * uint64_t(c) * uint64_t(c);           // local W_O

    const int64_t gh = ceil_div(oh, r), gw = ceil_div(ow, r), g = gh * gw;
    if (cfg.window_embed == WindowEmbedKind::DwConv) out.macs += conv_m(gh, gw, r, r, 1, c);
    out.macs += 2 * uint64_t(g) * uint64_t(c) * uint64_t(c);           // K_G, V_G
    out.macs += conv_m(oh, ow, 3, 3, 1, c);                            // fixup DWConv
    const int64_t n = oh * ow;
    out.macs += 2 * uint64_t(n) * uint64_t(g) * uint64_t(c);           // global qk^T and attn*v
    out.macs += uint64_t(n) * uint64_t(c) * uint64_t(c);               // global W_O
    return out;
}

inline CostRow pup_head(const std::string& name, int64_t grid, int64_t c_in, int64_t width, int64_t k,
                        int64_t stride) {
    CostRow row{name, 0, 0};
    int64_t in = c_in, g = grid;
    for (int64_t s = stride; s > 1; s /= 2) {
        row.params += conv_p(3, 3, in, width) + norm_p(width);
        row.macs += conv_m(g, g, 3, 3, in, width);
        in = width;
        g *= 2;
    }
    row.params += conv_p(1, 1, in, k);
    row.macs += conv_m(g, g, 1, 1, in, k);
    return row;
}

}  // namespace cost

inline CostReport analyze_hlg(const HlgConfig& cfg_in, HlgTask task, int64_t input) {
    HlgConfig cfg = cfg_in;
    cfg.finalize();
    CostReport report;
    report.model = cfg.variant.empty() ? "hlg" : cfg.variant;
    report.input = input;

    const int64_t h = cfg.stem_width();
    const int64_t c1 = cfg.stages[0].channels;
    const int64_t g2 = cost::conv_out(input, 3, 2, 1);
    const int64_t g4 = cost::conv_out(g2, 3, 2, 1);
    CostRow stem{"stem", 0, 0};
    stem.params = cost::conv_p(3, 3, 3, h) + cost::conv_p(1, 1, h, h) + cost::conv_p(3, 3, h, c1) +
                  cost::norm_p(c1);
    stem.macs = cost::conv_m(g2, g2, 3, 3, 3, h) + cost::conv_m(g2, g2, 1, 1, h, h) +
                cost::conv_m(g4, g4, 3, 3, h, c1);
    report.rows.push_back(stem);

    int64_t grid = g4;
    for (int i = 0; i < 4; ++i) {
        const auto& st = cfg.stages[size_t(i)];
        CostRow row{strcat_all("stage", i), 0, 0};
        const int64_t native = std::max<int64_t>(1, ceil_div(cfg.input, int64_t(4) << i));
        const int64_t c_prev = i == 0 ? st.channels : cfg.stages[size_t(i - 1)].channels;
        for (int64_t sub = 0; sub < st.depth; ++sub) {
            const bool transition = (i > 0 && sub == 0);
            auto c = cost::hlg_sublayer(grid, grid, transition ? c_prev : st.channels, st.channels,
                                        st.mlp_hidden, transition ? 2 : 1, st.heads, st.window,
                                        sub % 2 == 0 ? 1 : st.dilation, native, native, cfg);
            row.params += c.params;
            row.macs += c.macs;
            grid = c.oh;
        }
        row.params += cost::norm_p(st.channels);  // stage output norm
        report.rows.push_back(row);
    }

    if (task == HlgTask::Classify) {
        CostRow head{"head", 0, 0};
        head.params = cost::linear_p(cfg.stages[3].channels, cfg.num_classes);
        head.macs = uint64_t(cfg.stages[3].channels) * uint64_t(cfg.num_classes);
        report.rows.push_back(head);
    } else {
        const int64_t g16 = std::max<int64_t>(1, input / 16);
        int64_t cat = 0;
        for (const auto& s : cfg.stages) cat += s.channels;
        const int64_t c3 = cfg.stages[2].channels;
        CostRow fuse{"seg.fuse", cost::conv_p(1, 1, cat, c3), cost::conv_m(g16, g16, 1, 1, cat, c3)};
        report.rows.push_back(fuse);
        CostRow pair{"seg.pair", 0, 0};
        const int64_t native16 = std::max<int64_t>(1, cfg.input / 16);
        for (int sub = 0; sub < 2; ++sub) {
            auto c = cost::hlg_sublayer(g16, g16, c3, c3, cfg.stages[2].mlp_hidden, 1, cfg.stages[2].heads,
                                        cfg.seg_window, sub == 0 ? 1 : cfg.seg_dilation, native16, native16,
                                        cfg);
            pair.params += c.params;
            pair.macs += c.macs;
        }
        report.rows.push_back(pair);
        report.rows.push_back(cost::pup_head("seg.pup", g16, c3, cfg.seg_pup_channels, cfg.seg_classes, 16));
    }
    return report;
}

inline CostReport analyze_setr(const SetrConfig& cfg_in, int64_t input) {
    SetrConfig cfg = cfg_in;
    cfg.finalize();
    CostReport report;
    report.model = "setr";
    report.input = input;
    const int64_t c = cfg.hidden;
    const int64_t grid = input / cfg.patch;
    const int64_t l = grid * grid;

    CostRow embed{"embed", 0, 0};
    embed.params = cost::linear_p(3 * cfg.patch * cfg.patch, c) + cfg.token_count() * c;
    embed.macs = uint64_t(l) * uint64_t(3 * cfg.patch * cfg.patch) * uint64_t(c);
    report.rows.push_back(embed);

    CostRow enc{"encoder", 0, 0};
    const int64_t mlp_hidden = c * cfg.mlp_ratio;
    enc.params = cfg.layers * (2 * cost::norm_p(c) + 4 * cost::linear_p(c, c) +
                               cost::linear_p(c, mlp_hidden) + cost::linear_p(mlp_hidden, c)) +
                 cost::norm_p(c);
    enc.macs = uint64_t(cfg.layers) *
               (4 * uint64_t(l) * uint64_t(c) * uint64_t(c) + 2 * uint64_t(l) * uint64_t(l) * uint64_t(c) +
                2 * uint64_t(l) * uint64_t(c) * uint64_t(mlp_hidden));
    report.rows.push_back(enc);

    const int64_t k = cfg.num_classes;
    switch (cfg.decoder) {
        case SetrDecoderKind::Naive: {
            CostRow dec{"decoder", 0, 0};
            dec.params = cost::conv_p(1, 1, c, c) + cost::norm_p(c) + cost::conv_p(1, 1, c, k);
            dec.macs = cost::conv_m(grid, grid, 1, 1, c, c) + cost::conv_m(grid, grid, 1, 1, c, k);
            report.rows.push_back(dec);
            break;
        }
        case SetrDecoderKind::Pup:
            report.rows.push_back(cost::pup_head("decoder", grid, c, cfg.pup_channels, k, cfg.patch));
            break;
        case SetrDecoderKind::Mla: {
            CostRow dec{"decoder", 0, 0};
            const int64_t w = c / 4;
            const int64_t m = cfg.mla_streams;
            dec.params = m * (cost::conv_p(1, 1, c, w) + cost::norm_p(w) +
                              3 * (cost::conv_p(3, 3, w, w) + cost::norm_p(w))) +
                         cost::conv_p(1, 1, w * m, k);
            dec.macs = uint64_t(m) * (cost::conv_m(grid, grid, 1, 1, c, w) +
                                      3 * cost::conv_m(grid, grid, 3, 3, w, w)) +
                       cost::conv_m(grid * 4, grid * 4, 1, 1, w * m, k);
            report.rows.push_back(dec);
            break;
        }
    }

    if (cfg.aux_enabled && !cfg.aux_taps.empty()) {
        CostRow aux{"aux", 0, 0};
        const int64_t ac = cfg.aux_channels;
        aux.params = int64_t(cfg.aux_taps.size()) *
                     (cost::conv_p(1, 1, c, ac) + cost::norm_p(ac) + cost::conv_p(1, 1, ac, k));
        aux.macs = uint64_t(cfg.aux_taps.size()) *
                   (cost::conv_m(grid, grid, 1, 1, c, ac) + cost::conv_m(grid, grid, 1, 1, ac, k));
        report.rows.push_back(aux);
    }
    return report;
}

// Pass/fail audit of a report against expected figures.
struct AuditLine {
    std::string name;
    double expected = 0, actual = 0, tolerance = 0;
    bool pass = false;
};

inline AuditLine audit_value(const std::string& name, double actual, double expected, double rel_tol) {
    AuditLine line{name, expected, actual, rel_tol, false};
    line.pass = std::fabs(actual - expected) <= rel_tol * expected;
    return line;
}

}  // namespace vistra
