#pragma once

#include <string>

#include "anynet/graph.hpp"

namespace anynet {

// Bundled graph templates. Operation = edge, featuremap = node. Residual
// additions are parameter-free, so templates mark them always_keep along
// with the input and output layers.

inline GraphSpec chain_spec(int layers, int channels) {
    GraphSpec s;
    for (int i = 0; i <= layers; ++i) s.nodes.push_back("v" + std::to_string(i));
    for (int i = 1; i <= layers; ++i) {
        EdgeSpec e;
        e.id = "lin" + std::to_string(i);
        e.src = "v" + std::to_string(i - 1);
        e.dst = "v" + std::to_string(i);
        e.kind = EdgeKind::linear;
        e.c_in = e.c_out = channels;
        e.cost = 2.0 * channels * channels;
        e.always_keep = (i == 1 || i == layers);
        s.edges.push_back(e);
    }
    s.input = "v0";
    s.output = "v" + std::to_string(layers);
    return s;
}

// MobileNet-v2 style inverted residual block: 1x1 expansion conv, depthwise
// conv, 1x1 projection conv, and a residual add from block input to output.
inline GraphSpec inverted_residual_spec(int channels = 16, int expansion = 6) {
    GraphSpec s;
    s.nodes = {"in", "exp", "dw", "out"};
    int ce = channels * expansion;
    s.edges = {
        {"conv_expand", "in", "exp", EdgeKind::conv, channels, ce, 2.0 * channels * ce, false},
        {"conv_dw", "exp", "dw", EdgeKind::depthwise_conv, ce, ce, 18.0 * ce, false},
        {"conv_project", "dw", "out", EdgeKind::conv, ce, channels, 2.0 * ce * channels, false},
        {"residual", "in", "out", EdgeKind::residual_add, channels, channels, 0.0, true},
    };
    s.input = "in";
    s.output = "out";
    return s;
}

// ResNet-18/34 style basic block: two 3x3 convs plus the shortcut.
inline GraphSpec basic_residual_spec(int channels = 16) {
    GraphSpec s;
    s.nodes = {"in", "mid", "out"};
    s.edges = {
        {"conv1", "in", "mid", EdgeKind::conv, channels, channels, 18.0 * channels * channels, false},
        {"conv2", "mid", "out", EdgeKind::conv, channels, channels, 18.0 * channels * channels, false},
        {"residual", "in", "out", EdgeKind::residual_add, channels, channels, 0.0, true},
    };
    s.input = "in";
    s.output = "out";
    return s;
}

// Residual MLP stack: `depth` dense layers of `width` neurons; a shortcut
// bridges every pair of consecutive layers (basic-block style). Odd depths
// leave a trailing unbridged layer.
inline GraphSpec residual_mlp_spec(int depth, int width) {
    GraphSpec s = chain_spec(depth, width);
    for (int j = 0; j + 2 <= depth; j += 2) {
        EdgeSpec e;
        e.id = "res" + std::to_string(j / 2);
        e.src = "v" + std::to_string(j);
        e.dst = "v" + std::to_string(j + 2);
        e.kind = EdgeKind::residual_add;
        e.c_in = e.c_out = width;
        e.cost = 0.0;
        e.always_keep = true;
        s.edges.push_back(e);
    }
    return s;
}

// Toy classifier supernet for the training experiments: a stem, three
// two-layer residual blocks joined by bottleneck layers, and a head. The
// bottleneck layers have no shortcut around them, so they sit on every
// computation path.
inline GraphSpec toy_classifier_spec(int channels = 16, int blocks = 3) {
    GraphSpec s;
    auto u = [](int i) { return "u" + std::to_string(i); };
    s.nodes.push_back("in");
    for (int i = 0; i < 2 * blocks; ++i) s.nodes.push_back(u(i));
    for (int j = 0; j < blocks; ++j) s.nodes.push_back("m" + std::to_string(j));
    s.nodes.push_back("out");
    double c2 = 2.0 * channels * channels;
    s.edges.push_back({"stem", "in", u(0), EdgeKind::linear, channels, channels, c2, true});
    for (int j = 0; j < blocks; ++j) {
        std::string m = "m" + std::to_string(j);
        s.edges.push_back({"blk" + std::to_string(j) + "_conv1", u(2 * j), m, EdgeKind::linear, channels,
                           channels, c2, false});
        s.edges.push_back({"blk" + std::to_string(j) + "_conv2", m, u(2 * j + 1), EdgeKind::linear, channels,
                           channels, c2, false});
        s.edges.push_back({"blk" + std::to_string(j) + "_skip", u(2 * j), u(2 * j + 1),
                           EdgeKind::residual_add, channels, channels, 0.0, true});
        if (j + 1 < blocks)
            s.edges.push_back({"bottleneck" + std::to_string(j), u(2 * j + 1), u(2 * j + 2),
                               EdgeKind::linear, channels, channels, c2, true});
    }
    s.edges.push_back({"head", u(2 * blocks - 1), "out", EdgeKind::linear, channels, channels, c2, true});
    s.input = "in";
    s.output = "out";
    return s;
}

// Lookup for "builtin:<name>" graph references used by the CLI.
inline GraphSpec builtin_graph_spec(const std::string& name) {
    if (name == "chain3") return chain_spec(2, 4);
    if (name == "inverted-residual") return inverted_residual_spec();
    if (name == "basic-residual") return basic_residual_spec();
    if (name == "toy-classifier") return toy_classifier_spec();
    auto parse_mlp = [&](const std::string& s) -> GraphSpec {
        // residual-mlp-<depth>x<width>
        auto rest = s.substr(std::string("residual-mlp-").size());
        auto xpos = rest.find('x');
        if (xpos == std::string::npos) throw GraphError("bad residual-mlp template name: " + s);
        int depth = std::stoi(rest.substr(0, xpos));
        int width = std::stoi(rest.substr(xpos + 1));
        if (depth < 2 || width < 1) throw GraphError("bad residual-mlp template size: " + s);
        return residual_mlp_spec(depth, width);
    };
    if (name.rfind("residual-mlp-", 0) == 0) return parse_mlp(name);
    throw GraphError("unknown builtin graph: " + name);
}

}  // namespace anynet
