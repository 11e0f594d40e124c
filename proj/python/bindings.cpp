#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tcg/detection.hpp"
#include "tcg/errors.hpp"
#include "tcg/event.hpp"
#include "tcg/features.hpp"
#include "tcg/graph.hpp"
#include "tcg/pipeline.hpp"
#include "tcg/signatures.hpp"
#include "tcg/simgen.hpp"
#include "tcg/sweep.hpp"

namespace py = pybind11;
using namespace tcg;

namespace {

std::vector<EventRecord> parse_trace_text(const std::string& text, bool skip_malformed) {
    std::istringstream in(text);
    return read_trace(in, skip_malformed).events;
}

std::string trace_text(const std::vector<EventRecord>& events) {
    std::ostringstream out;
    write_trace(out, events);
    return out.str();
}

GroundTruth parse_truth_text(const std::string& text) {
    std::istringstream in(text);
    return read_ground_truth(in);
}

std::string truth_text(const GroundTruth& truth) {
    std::ostringstream out;
    write_ground_truth(out, truth);
    return out.str();
}

py::dict counts_dict(const ConfusionCounts& c) {
    py::dict d;
    d["tp"] = c.tp;
    d["fp"] = c.fp;
    d["tn"] = c.tn;
    d["fn"] = c.fn;
    d["precision"] = precision(c);
    d["recall"] = recall(c);
    d["f1"] = f1(c);
    d["accuracy"] = accuracy(c);
    return d;
}

std::map<std::string, double> pagerank_scores(const TemporalCorrelationGraph& g, double damping) {
    PageRankOptions o;
    o.damping = damping;
    std::map<std::string, double> out;
    for (const auto& [k, v] : pagerank(g, o).scores) out[describe(k)] = v;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Temporal correlation graph construction, features and detection";
    m.attr("__version__") = "0.1.0";

    py::register_exception<Error>(m, "TcgError", PyExc_ValueError);

    py::enum_<OperationKind> op(m, "OperationKind");
    for (auto k : kAllOperations) op.value(std::string(to_string(k)).c_str(), k);
    py::enum_<TargetClass> tc(m, "TargetClass");
    for (auto k : kAllTargetClasses) tc.value(std::string(to_string(k)).c_str(), k);

    py::class_<EventRecord>(m, "EventRecord")
        .def(py::init<>())
        .def_readwrite("ts", &EventRecord::ts)
        .def_readwrite("seq", &EventRecord::seq)
        .def_readwrite("pid", &EventRecord::pid)
        .def_readwrite("proc", &EventRecord::proc)
        .def_readwrite("op", &EventRecord::op)
        .def_readwrite("target", &EventRecord::target)
        .def_readwrite("bytes", &EventRecord::bytes)
        .def_readwrite("entropy", &EventRecord::entropy)
        .def("__eq__", [](const EventRecord& a, const EventRecord& b) { return a == b; })
        .def("__repr__", [](const EventRecord& e) { return serialize_event(e); });

    m.def("parse_event", [](const std::string& line) { return parse_event_line(line); }, py::arg("line"));
    m.def("serialize_event", &serialize_event, py::arg("event"));
    m.def("parse_trace", &parse_trace_text, py::arg("text"), py::arg("skip_malformed") = true);
    m.def("format_trace", &trace_text, py::arg("events"));
    m.def("align_events", &align_events, py::arg("events"));
    m.def("classify_target", &classify_target, py::arg("op"), py::arg("target"));
    m.def("shannon_entropy", [](const py::bytes& b) {
        const std::string s = b;
        const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
        return shannon_entropy(std::span<const std::uint8_t>(p, s.size()));
    });

    py::class_<GraphParams>(m, "GraphParams")
        .def(py::init<>())
        .def(py::init([](double delta, double tau, double window, double stride) {
                 GraphParams p{delta, tau, window, stride};
                 p.validate();
                 return p;
             }),
             py::arg("delta") = 2.0, py::arg("tau") = 1.0, py::arg("window") = 40.0, py::arg("stride") = 20.0)
        .def_readwrite("delta", &GraphParams::delta)
        .def_readwrite("tau", &GraphParams::tau)
        .def_readwrite("window", &GraphParams::window)
        .def_readwrite("stride", &GraphParams::stride);

    py::class_<TemporalCorrelationGraph>(m, "Graph")
        .def_property_readonly("node_count", [](const TemporalCorrelationGraph& g) { return g.nodes.size(); })
        .def_property_readonly("edge_count", [](const TemporalCorrelationGraph& g) { return g.edges.size(); })
        .def_readonly("window_start", &TemporalCorrelationGraph::window_start)
        .def_readonly("window_end", &TemporalCorrelationGraph::window_end)
        .def("nodes", [](const TemporalCorrelationGraph& g) {
            std::vector<std::string> out;
            for (const auto& [k, a] : g.nodes) out.push_back(describe(k));
            return out;
        })
        .def("edges", [](const TemporalCorrelationGraph& g) {
            std::vector<std::tuple<std::string, std::string, double, std::int64_t>> out;
            for (const auto& [k, a] : g.edges) out.emplace_back(describe(k.first), describe(k.second), a.weight, a.count);
            return out;
        })
        .def("to_dot", [](const TemporalCorrelationGraph& g) { return to_dot(g); })
        .def("snapshot", [](const TemporalCorrelationGraph& g) { return serialize_graph(g); })
        .def("__eq__", [](const TemporalCorrelationGraph& a, const TemporalCorrelationGraph& b) { return a == b; });

    m.def("parse_snapshot", &parse_graph, py::arg("text"));
    m.def("build_graph",
          [](const std::vector<EventRecord>& events, double start, double end, const GraphParams& p) {
              return build_graph(events, start, end, p);
          },
          py::arg("events"), py::arg("start"), py::arg("end"), py::arg("params") = GraphParams{});
    m.def("window_graphs",
          [](const std::vector<EventRecord>& events, const GraphParams& p) {
              std::vector<TemporalCorrelationGraph> out;
              for (const auto& w : windows(events, p)) out.push_back(build_graph(w.events, w.start, w.end, p));
              return out;
          },
          py::arg("events"), py::arg("params") = GraphParams{});

    m.def("edge_density", &edge_density);
    m.def("clustering", [](const TemporalCorrelationGraph& g) {
        const auto c = clustering(g);
        return std::make_pair(c.global, c.mean_local);
    });
    m.def("diameter", &diameter);
    m.def("pagerank", &pagerank_scores, py::arg("graph"), py::arg("damping") = 0.85);
    m.def("max_out_strength", &max_out_strength);
    m.attr("FEATURE_NAMES") = [] {
        std::vector<std::string> names;
        for (auto n : kFeatureNames) names.emplace_back(n);
        return names;
    }();
    m.def("feature_vector",
          [](const TemporalCorrelationGraph& g, const std::vector<EventRecord>& slice) {
              const auto f = feature_vector(g, slice);
              return std::vector<double>(f.begin(), f.end());
          },
          py::arg("graph"), py::arg("events"));

    m.def("simulate",
          [](const std::string& profile) {
              const auto t = simulate(parse_simulation_profile(profile));
              return std::make_pair(t.events, truth_text(t.truth));
          },
          py::arg("profile"), "Returns (events, ground-truth JSON lines).");
    m.def("acceptance_corpus",
          [](std::uint64_t seed) {
              const auto t = build_corpus(acceptance_corpus(seed));
              return std::make_pair(t.events, truth_text(t.truth));
          },
          py::arg("seed") = 1);

    m.def("builtin_signatures", [] {
        std::vector<std::string> out;
        for (const auto& s : builtin_signatures()) out.push_back(serialize_signature(s));
        return out;
    });
    m.def("match_signature",
          [](const TemporalCorrelationGraph& g, const std::string& doc, std::size_t limit) {
              std::vector<std::map<std::string, std::string>> out;
              for (const auto& mt : match_signature(g, parse_signature(doc), limit)) {
                  std::map<std::string, std::string> a;
                  for (const auto& [id, k] : mt.assignment) a[id] = describe(k);
                  out.push_back(std::move(a));
              }
              return out;
          },
          py::arg("graph"), py::arg("signature"), py::arg("limit") = kDefaultMatchLimit);

    m.def("train",
          [](const std::vector<EventRecord>& events, const std::string& truth, const std::string& config,
             std::optional<std::size_t> per_class) {
              const auto cfg = config.empty() ? PipelineConfig{} : parse_config(config);
              TrainOptions o;
              o.per_class = per_class;
              const auto r = run_train(cfg, events, parse_truth_text(truth), resolve_signatures(cfg), o);
              return std::make_pair(serialize_model(r.model), counts_dict(r.test_counts));
          },
          py::arg("events"), py::arg("truth"), py::arg("config") = "", py::arg("per_class") = py::none(),
          "Returns (model document, test-split metrics).");
    m.def("detect",
          [](const std::string& model, const std::string& trace, const std::string& mode, int threads) {
              PipelineConfig cfg;
              cfg.mode = mode == "batch" ? RunMode::Batch : RunMode::Stream;
              cfg.threads = threads;
              const auto mdl = parse_model(model);
              std::istringstream in(trace);
              std::ostringstream out;
              run_detect(cfg, mdl, builtin_signatures(), in, out);
              return out.str();
          },
          py::arg("model"), py::arg("trace"), py::arg("mode") = "stream", py::arg("threads") = 1,
          "Runs detection over trace JSON lines and returns alert JSON lines.");
    m.def("evaluate",
          [](const std::string& alerts, const std::vector<EventRecord>& events, const std::string& truth) {
              std::istringstream in(alerts);
              const auto a = read_alerts(in);
              const auto r = evaluate_alerts(a, events, parse_truth_text(truth));
              py::dict d = counts_dict(r.counts);
              d["mean_latency"] = r.latency.mean;
              d["undetected"] = r.latency.undetected;
              d["report"] = summary_report(r.counts, r.latency, r.families);
              return d;
          },
          py::arg("alerts"), py::arg("events"), py::arg("truth"));
}
