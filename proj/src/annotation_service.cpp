#include "sensery/annotation_service.hpp"

#include <chrono>

#include "httplib.h"

namespace sensery {

AnnotationService::AnnotationService(std::vector<AnnotationTask> tasks,
                                     std::optional<std::filesystem::path> journal)
    : tasks_(std::move(tasks)), answered_by_(tasks_.size()) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!index_.emplace(tasks_[i].task_id, i).second) {
      throw ValidationError("duplicate task id '" + tasks_[i].task_id + "'");
    }
  }
  if (!journal) return;
  if (std::filesystem::exists(*journal)) {
    for (const AnnotationResponse& r : read_responses(*journal)) {
      const auto status = submit_locked(r.task_id, r.annotator_id, r.answer, r.timestamp, false);
      if (status != SubmitStatus::Created) {
        throw ValidationError("journal " + journal->string() + " does not match the task list at '" +
                              r.task_id + "' / '" + r.annotator_id + "'");
      }
    }
  }
  journal_.emplace(*journal, std::ios::app | std::ios::binary);
  if (!*journal_) throw IoError("cannot open journal " + journal->string());
}

std::optional<AnnotationService::TaskView> AnnotationService::next_task(
    const std::string& annotator) const {
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& who = answered_by_[i];
    if (static_cast<int>(who.size()) >= tasks_[i].required_annotators) continue;
    if (who.contains(annotator)) continue;
    return TaskView{tasks_[i].task_id, tasks_[i].phrase.text(), tasks_[i].phrase.sense};
  }
  return std::nullopt;
}

AnnotationService::SubmitStatus AnnotationService::submit(const std::string& task_id,
                                                          const std::string& annotator,
                                                          const std::string& answer,
                                                          std::int64_t timestamp) {
  const auto parsed = parse_answer(answer);
  if (!parsed) return SubmitStatus::BadAnswer;
  std::lock_guard lock(mu_);
  return submit_locked(task_id, annotator, *parsed, timestamp, true);
}

AnnotationService::SubmitStatus AnnotationService::submit_locked(const std::string& task_id,
                                                                 const std::string& annotator,
                                                                 Answer answer,
                                                                 std::int64_t timestamp,
                                                                 bool journal) {
  const auto it = index_.find(task_id);
  if (it == index_.end()) return SubmitStatus::UnknownTask;
  auto& who = answered_by_[it->second];
  if (who.contains(annotator)) return SubmitStatus::Duplicate;
  if (static_cast<int>(who.size()) >= tasks_[it->second].required_annotators) {
    return SubmitStatus::TaskFull;
  }
  AnnotationResponse r{task_id, annotator, answer, timestamp};
  if (journal && journal_) {
    *journal_ << response_to_json(r) << '\n';
    journal_->flush();
    if (!*journal_) throw IoError("journal write failed");
  }
  who.insert(annotator);
  responses_.push_back(std::move(r));
  return SubmitStatus::Created;
}

std::vector<AnnotationResponse> AnnotationService::responses() const {
  std::lock_guard lock(mu_);
  return responses_;
}

nlohmann::ordered_json AnnotationService::progress() const {
  std::lock_guard lock(mu_);
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (Sense sense : kAllSenses) {
    int complete = 0;
    int incomplete = 0;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (tasks_[i].phrase.sense != sense) continue;
      if (static_cast<int>(answered_by_[i].size()) >= tasks_[i].required_annotators) {
        ++complete;
      } else {
        ++incomplete;
      }
    }
    out[std::string(sense_name(sense))] = {{"complete", complete}, {"incomplete", incomplete}};
  }
  return out;
}

nlohmann::ordered_json AnnotationService::results() const {
  std::vector<AnnotationResponse> snapshot;
  int annotators = 3;
  {
    std::lock_guard lock(mu_);
    snapshot = responses_;
    if (!tasks_.empty()) annotators = tasks_.front().required_annotators;
  }
  const auto verdicts = aggregate_complete(snapshot, annotators);
  nlohmann::ordered_json out;
  out["verdicts"] = nlohmann::ordered_json::array();
  for (const Verdict& v : verdicts) {
    out["verdicts"].push_back({{"task_id", v.task_id},
                               {"phrase", join(v.phrase)},
                               {"sense", sense_name(v.sense)},
                               {"accepted", v.accepted},
                               {"tally",
                                {{"yes", v.tally.yes},
                                 {"no", v.tally.no},
                                 {"notsure", v.tally.notsure}}}});
  }
  out["senses"] = nlohmann::ordered_json::object();
  for (Sense sense : kAllSenses) {
    const SenseSummary s = summarize(verdicts, snapshot, sense);
    nlohmann::ordered_json j;
    j["tasks"] = s.tasks;
    j["accepted"] = s.accepted;
    j["%majority_yes"] = s.tasks > 0 ? nlohmann::ordered_json(s.majority_yes) : nullptr;
    j["kappa"] = s.kappa ? nlohmann::ordered_json(*s.kappa) : nullptr;
    if (!s.kappa) j["kappa_error"] = s.kappa_error;
    j["notsure"] = s.notsure;
    out["senses"][std::string(sense_name(sense))] = std::move(j);
  }
  return out;
}

nlohmann::ordered_json task_view_json(const AnnotationService::TaskView& view) {
  return {{"task_id", view.task_id}, {"phrase", view.phrase}, {"sense", sense_name(view.sense)}};
}

void AnnotationService::attach(httplib::Server& server) {
  constexpr const char* kJson = "application/json";

  server.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) {
      res.status = 400;
      res.set_content(R"({"error":"missing annotator"})", kJson);
      return;
    }
    const auto task = next_task(annotator);
    if (!task) {
      res.status = 204;
      return;
    }
    res.set_content(task_view_json(*task).dump(), kJson);
  });

  server.Post("/api/responses", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"body is not JSON"})", kJson);
      return;
    }
    const auto field = [&](const char* name) -> std::string {
      auto it = body.find(name);
      return it != body.end() && it->is_string() ? it->get<std::string>() : std::string();
    };
    const std::string task_id = field("task_id");
    const std::string annotator = field("annotator");
    if (task_id.empty() || annotator.empty()) {
      res.status = 400;
      res.set_content(R"({"error":"task_id and annotator are required"})", kJson);
      return;
    }
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    switch (submit(task_id, annotator, field("answer"), now)) {
      case SubmitStatus::Created:
        res.status = 201;
        res.set_content(R"({"status":"created"})", kJson);
        break;
      case SubmitStatus::Duplicate:
        res.status = 409;
        res.set_content(R"({"error":"duplicate response"})", kJson);
        break;
      case SubmitStatus::TaskFull:
        res.status = 409;
        res.set_content(R"({"error":"task already has all responses"})", kJson);
        break;
      case SubmitStatus::UnknownTask:
        res.status = 404;
        res.set_content(R"({"error":"unknown task"})", kJson);
        break;
      case SubmitStatus::BadAnswer:
        res.status = 400;
        res.set_content(R"({"error":"answer must be yes, no or notsure"})", kJson);
        break;
    }
  });

  server.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(progress().dump(), kJson);
  });

  server.Get("/api/results", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(results().dump(), kJson);
  });
}

void serve_annotations(AnnotationService& service, const std::string& host, int port,
                       const std::optional<std::filesystem::path>& static_dir) {
  httplib::Server server;
  service.attach(server);
  if (static_dir && !server.set_mount_point("/", static_dir->string())) {
    throw IoError("cannot serve static files from " + static_dir->string());
  }
  if (!server.listen(host, port)) {
    throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace sensery
