#include <spock/builder.hpp>
#include <spock/cli.hpp>
#include <spock/error.hpp>
#include <spock/provenance.hpp>
#include <spock/recipe.hpp>
#include <spock/revocation.hpp>
#include <spock/rungate.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using nlohmann::json;
using namespace spock;

namespace {

py::object to_py(const json& j) {
    switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
        py::list out;
        for (const auto& v : j) out.append(to_py(v));
        return std::move(out);
    }
    case json::value_t::object: {
        py::dict out;
        for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
        return std::move(out);
    }
    default: throw std::runtime_error("unsupported JSON value");
    }
}

json recipe_view(const RecipeRecord& r) {
    auto j = to_json(r);
    j["status"] = to_string(r.status);
    return j;
}

json image_view(const ImageRecord& i) {
    auto j = to_json(i);
    j["status"] = to_string(i.status);
    return j;
}

json bundle_view(const ArchiveBundle& b) {
    json recipes = json::array(), images = json::array();
    for (const auto& r : b.removed_recipes) recipes.push_back(r.recipe_hash.hex());
    for (const auto& i : b.removed_images) images.push_back(i.image_id.str());
    return {{"bundle_id", b.bundle_id.hex()},
            {"created_at", format_timestamp(b.created_at)},
            {"reason", b.reason},
            {"distrusted", b.distrusted},
            {"recipes", recipes},
            {"images", images}};
}

LedgerOptions options_for(const std::optional<std::string>& clock) {
    LedgerOptions o;
    if (clock) o.clock = std::make_shared<SteppingClock>(parse_timestamp(*clock));
    return o;
}

std::unique_ptr<BuildEngine> engine_for(const std::string& seed, const std::optional<std::string>& command) {
    if (command) return std::make_unique<ExecEngine>(*command);
    return std::make_unique<MockEngine>(seed);
}

} // namespace

PYBIND11_MODULE(_spock, m) {
    m.doc() = "Signed-provenance build gatekeeper: ledger, recipes, images, revocation and run gate.";

    // Raised with args (token, message); the type lives as long as the interpreter.
    static PyObject* spock_error = py::exception<Error>(m, "SpockError").release().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            auto inst = py::reinterpret_borrow<py::object>(spock_error)(std::string(e.token()), std::string(e.what()));
            PyErr_SetObject(spock_error, inst.ptr());
        }
    });

    m.def("digest", [](py::bytes data) { return digest(std::string(data)).hex(); },
          "SHA-256 of `data` as lowercase hex.");

    py::class_<PrivateKey>(m, "PrivateKey")
        .def_static("generate", [] { return keygen().private_key; })
        .def_static("from_seed", [](py::bytes seed) {
            auto s = std::string(seed);
            return PrivateKey(SignatureScheme::ed25519, Bytes(s.begin(), s.end()));
        })
        .def_static("read", [](const std::filesystem::path& p) { return read_private_key_file(p); })
        .def("write", [](const PrivateKey& k, const std::filesystem::path& p) { write_private_key_file(p, k); })
        .def("write_public", [](const PrivateKey& k, const std::filesystem::path& p) {
            write_public_key_file(p, k.public_key());
        })
        .def_property_readonly("public_key", [](const PrivateKey& k) { return k.public_key().to_text(); })
        .def("sign", [](const PrivateKey& k, py::bytes data) {
            return sign(as_bytes(std::string(data)), k, "").to_text();
        });

    m.def("verify", [](py::bytes data, const std::string& signature, const std::string& public_key) {
        try {
            auto sig = Signature::from_text(signature, "");
            return verify(as_bytes(std::string(data)), sig, PublicKey::from_text(public_key));
        } catch (const Error&) {
            return false;
        }
    });

    py::class_<Ledger>(m, "Ledger")
        .def_static("init", [](const std::filesystem::path& dir, std::optional<std::string> clock) {
            return Ledger::init(dir, options_for(clock));
        }, py::arg("dir"), py::arg("clock") = py::none())
        .def_static("open", [](const std::filesystem::path& dir, std::optional<std::string> clock) {
            return Ledger::open(dir, options_for(clock));
        }, py::arg("dir"), py::arg("clock") = py::none())
        .def_property_readonly("dir", &Ledger::dir)
        .def("trust", [](Ledger& l, const std::string& id, const std::string& public_key) {
            return to_py(to_json(add_entity(l, id, PublicKey::from_text(public_key))));
        })
        .def("register", [](Ledger& l, const std::string& text, const std::string& signer, const PrivateKey& key) {
            return to_py(recipe_view(register_recipe(l, text, signer, key)));
        }, "Registers a root or child recipe, classified by its FROM line.")
        .def("build", [](Ledger& l, const std::string& recipe, const std::string& signer, const PrivateKey& key,
                         const std::string& seed, std::optional<std::string> command) {
            l.refresh();
            auto node = resolve_node(l.state(), recipe);
            if (!std::holds_alternative<Digest>(node)) throw Error(ErrorCode::usage, "build takes a recipe hash");
            auto engine = engine_for(seed, command);
            return to_py(image_view(build(l, std::get<Digest>(node), *engine, signer, key)));
        }, py::arg("recipe"), py::arg("signer"), py::arg("key"), py::arg("seed") = "spock",
           py::arg("command") = py::none())
        .def("diff_rebuild", [](Ledger& l, const std::string& image_id, const std::string& seed,
                                std::optional<std::string> command) {
            auto engine = engine_for(seed, command);
            return to_py(to_json(diff_rebuild(l, ImageId::parse(image_id), *engine)));
        }, py::arg("image_id"), py::arg("seed") = "spock", py::arg("command") = py::none())
        .def("remove", [](Ledger& l, const std::string& node, const std::string& reason) {
            l.refresh();
            return to_py(bundle_view(remove(l, resolve_node(l.state(), node), reason)));
        })
        .def("distrust", [](Ledger& l, const std::string& entity, const std::string& reason) {
            return to_py(bundle_view(distrust(l, entity, reason)));
        })
        .def("lineage", [](Ledger& l, const std::string& node) {
            l.refresh();
            return format_lineage(lineage(l.state(), resolve_node(l.state(), node)));
        })
        .def("content", [](Ledger& l, const std::string& node, bool with_lineage) {
            l.refresh();
            return show_content(l.state(), resolve_node(l.state(), node), with_lineage);
        }, py::arg("node"), py::arg("lineage") = false)
        .def("tree", [](Ledger& l, const std::string& format) {
            l.refresh();
            if (format != "dot" && format != "json") throw Error(ErrorCode::usage, "format must be dot or json");
            return export_tree(l.state(), format == "json" ? TreeFormat::json : TreeFormat::dot);
        }, py::arg("format") = "json")
        .def("recipes", [](Ledger& l, std::optional<std::string> status) {
            l.refresh();
            LedgerState::RecipeFilter f;
            if (status) f.status = record_status_from(*status);
            json out = json::array();
            for (const auto* r : l.state().list_recipes(f)) out.push_back(recipe_view(*r));
            return to_py(out);
        }, py::arg("status") = py::none())
        .def("images", [](Ledger& l, std::optional<std::string> status) {
            l.refresh();
            std::optional<RecordStatus> s;
            if (status) s = record_status_from(*status);
            json out = json::array();
            for (const auto* i : l.state().list_images(s)) out.push_back(image_view(*i));
            return to_py(out);
        }, py::arg("status") = py::none())
        .def("validate", [](Ledger& l) {
            l.refresh();
            auto report = validate_all(l.state());
            json entries = json::array();
            for (const auto& e : report.entries)
                entries.push_back({{"record_type", e.record_type}, {"id", e.id}, {"ok", e.ok()}, {"problems", e.problems}});
            return to_py({{"ok", report.ok()}, {"entries", entries}});
        })
        .def("check", [](Ledger& l, const std::string& image_id) {
            return to_py(to_json(check_runnable(l, image_id)));
        })
        .def("archives", [](Ledger& l) {
            l.refresh();
            json out = json::array();
            for (const auto& a : list_archives(l.state()))
                out.push_back({{"bundle_id", a.bundle_id.hex()}, {"reason", a.reason}, {"recipes", a.recipes},
                               {"images", a.images}});
            return to_py(out);
        })
        .def("open_archive", [](Ledger& l, const std::string& bundle) {
            return to_py(manifest_json(open_archive(l, bundle)));
        });

    m.def("run_cli", [](std::vector<std::string> args, std::map<std::string, std::string> env, const std::string& input) {
        args.insert(args.begin(), "spock");
        std::ostringstream out, err;
        std::istringstream in(input);
        CliIo io{out, err, in, [env](const std::string& k) -> std::optional<std::string> {
                     auto it = env.find(k);
                     if (it == env.end()) return std::nullopt;
                     return it->second;
                 }};
        int status = run_cli(args, io);
        return py::make_tuple(status, out.str(), err.str());
    }, py::arg("args"), py::arg("env") = std::map<std::string, std::string>{}, py::arg("input") = "",
       "Runs one CLI invocation in-process with an explicit environment; returns (status, stdout, stderr).");
}
