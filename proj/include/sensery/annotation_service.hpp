#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensery/annotation.hpp"

namespace httplib {
class Server;
}

namespace sensery {

// Collects yes/no/notsure judgments for a fixed task list. All state
// transitions go through one mutex; the journal is appended under it, so
// it is the single writer and replaying it reproduces the state.
class AnnotationService {
 public:
  enum class SubmitStatus { Created, Duplicate, TaskFull, UnknownTask, BadAnswer };

  struct TaskView {
    std::string task_id;
    std::string phrase;
    Sense sense;
  };

  // Replays `journal` if it exists, then appends to it.
  explicit AnnotationService(std::vector<AnnotationTask> tasks,
                             std::optional<std::filesystem::path> journal = std::nullopt);

  // Earliest task this annotator has not answered that still needs responses.
  std::optional<TaskView> next_task(const std::string& annotator) const;

  SubmitStatus submit(const std::string& task_id, const std::string& annotator,
                      const std::string& answer, std::int64_t timestamp = 0);

  nlohmann::ordered_json progress() const;
  nlohmann::ordered_json results() const;

  std::vector<AnnotationResponse> responses() const;
  const std::vector<AnnotationTask>& tasks() const { return tasks_; }

  // Registers the /api routes on `server`.
  void attach(httplib::Server& server);

 private:
  SubmitStatus submit_locked(const std::string& task_id, const std::string& annotator,
                             Answer answer, std::int64_t timestamp, bool journal);

  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::set<std::string>> answered_by_;  // per task
  std::vector<AnnotationResponse> responses_;
  std::optional<std::ofstream> journal_;
  mutable std::mutex mu_;
};

nlohmann::ordered_json task_view_json(const AnnotationService::TaskView& view);

// Blocks serving the API (and `static_dir`, if given, at "/") until stopped.
void serve_annotations(AnnotationService& service, const std::string& host, int port,
                       const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace sensery
