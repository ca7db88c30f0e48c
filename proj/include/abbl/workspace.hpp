#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "abbl/io.hpp"

namespace abbl {

namespace fs = std::filesystem;

// Exclusive advisory lock on a file, held for the object's lifetime.
class FileLock {
  public:
    explicit FileLock(const fs::path& path)
    {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0)
            fail(ErrorCode::IoError, "cannot open lock file '" + path.string() + "'");
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            fail(ErrorCode::WorkspaceLocked, "workspace is in use by another process");
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;
    ~FileLock()
    {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }

  private:
    int fd_ = -1;
};

/*!
 * On-disk project directory:
 *
 *     ontology.json       agent types
 *     kb.json             knowledge base
 *     scenarios/<id>.json
 *     worldviews/<id>.json
 *     posteriors/<parameter>.json
 *     results/            command outputs
 */
class Workspace {
  public:
    static constexpr const char* lock_name = ".abbl.lock";

    explicit Workspace(fs::path root) : root_(std::move(root)) {}

    static Workspace init(const fs::path& root)
    {
        Workspace ws(root);
        std::error_code ec;
        for (const char* dir : {"scenarios", "worldviews", "posteriors", "results"}) {
            fs::create_directories(root / dir, ec);
            if (ec)
                fail(ErrorCode::IoError, "cannot create '" + (root / dir).string() + "': " + ec.message());
        }
        if (!fs::exists(ws.ontology_path()))
            ws.save(Ontology{});
        if (!fs::exists(ws.kb_path()))
            ws.save(KnowledgeBase{});
        if (!fs::exists(ws.worldview_path("default"))) {
            WorldView w;
            w.id = "default";
            ws.save(w);
        }
        return ws;
    }

    void require_valid() const
    {
        if (!fs::exists(ontology_path()))
            fail(ErrorCode::IoError, "'" + root_.string() + "' is not a workspace (run 'abbl init')");
    }

    const fs::path& root() const noexcept { return root_; }
    fs::path lock_path() const { return root_ / lock_name; }
    fs::path ontology_path() const { return root_ / "ontology.json"; }
    fs::path kb_path() const { return root_ / "kb.json"; }
    fs::path results_dir() const { return root_ / "results"; }
    fs::path scenario_path(std::string_view id) const { return root_ / "scenarios" / (std::string(id) + ".json"); }
    fs::path worldview_path(std::string_view id) const { return root_ / "worldviews" / (std::string(id) + ".json"); }
    fs::path posterior_path(std::string_view name) const { return root_ / "posteriors" / (std::string(name) + ".json"); }
    fs::path result_path(std::string_view file) const { return results_dir() / std::string(file); }

    Ontology ontology() const { return io::ontology_from_json(io::read_json_file(ontology_path())); }
    void save(const Ontology& o) const { io::write_json_file(ontology_path(), io::to_json(o)); }

    KnowledgeBase kb() const { return io::knowledge_from_json(io::read_json_file(kb_path())); }
    void save(const KnowledgeBase& kb) const { io::write_json_file(kb_path(), io::to_json(kb)); }

    // A scenario reference is a registered id or a path to a scenario file.
    Scenario scenario(std::string_view ref) const
    {
        fs::path path = scenario_path(ref);
        if (!fs::exists(path)) {
            if (!fs::exists(fs::path(std::string(ref))))
                fail(ErrorCode::IoError, "no scenario '" + std::string(ref) + "'");
            path = std::string(ref);
        }
        Scenario s = io::scenario_from_json(io::read_json_file(path));
        if (s.id.empty())
            s.id = path.stem().string();
        return s;
    }

    std::vector<std::string> scenario_ids() const { return stems(root_ / "scenarios"); }

    WorldView worldview(std::string_view id, const Ontology& ontology) const
    {
        const auto path = worldview_path(id);
        if (!fs::exists(path))
            fail(ErrorCode::UnknownWorldView, "no worldview '" + std::string(id) + "'");
        return io::worldview_from_json(io::read_json_file(path), ontology);
    }

    bool has_worldview(std::string_view id) const { return fs::exists(worldview_path(id)); }

    void save(const WorldView& w) const { io::write_json_file(worldview_path(w.id), io::to_json(w)); }

    WorldViewRegistry registry(const Ontology& ontology) const
    {
        WorldViewRegistry reg;
        for (const auto& id : stems(root_ / "worldviews"))
            reg.insert(worldview(id, ontology));
        return reg;
    }

    void save(const Posterior& p) const { io::write_json_file(posterior_path(p.parameter.name), io::to_json(p)); }

    void write_result(std::string_view file, const std::string& text) const
    {
        std::error_code ec;
        fs::create_directories(results_dir(), ec);
        io::write_text_file(result_path(file).string(), text);
    }

    std::vector<fs::path> result_files() const
    {
        std::vector<fs::path> out;
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(results_dir(), ec))
            if (e.is_regular_file() && e.path().extension() == ".json")
                out.push_back(e.path());
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    static std::vector<std::string> stems(const fs::path& dir)
    {
        std::vector<std::string> out;
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(dir, ec))
            if (e.is_regular_file() && e.path().extension() == ".json")
                out.push_back(e.path().stem().string());
        std::sort(out.begin(), out.end());
        return out;
    }

    fs::path root_;
};

} // namespace abbl
