#include "subjqa/server.hpp"

#include "httplib.h"
#include "json.hpp"
#include "subjqa/common.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

WireResponse reply(int code, json body) {
  body["schema"] = kWireSchema;
  return {code, body.dump()};
}

int http_code(ServiceStatus s) {
  switch (s) {
    case ServiceStatus::kOk:
    case ServiceStatus::kNoTasks: return 200;
    case ServiceStatus::kWorkerDeactivated: return 403;
    case ServiceStatus::kTaskMismatch: return 409;
    case ServiceStatus::kBadRequest: return 400;
    default: return 422;
  }
}

json served_to_json(const ServedTask& t) {
  json j = {{"task_id", t.task_id},
            {"review_id", t.review_id},
            {"topic", t.topic_key},
            {"slot", t.slot}};
  if (t.kind == ServedTask::Kind::kQuestion) {
    j["kind"] = "question";
  } else {
    j["kind"] = "span";
    j["question"] = t.question_text;
  }
  return j;
}

}  // namespace

WireResponse handle_next_task(AnnotationStore& store, const std::string& worker) {
  if (worker.empty()) {
    return reply(400, {{"status", "BAD_REQUEST"},
                       {"message", "missing worker parameter"}});
  }
  const NextTaskResult r = store.next_task(worker);
  json body = {{"status", std::string(to_string(r.status))}};
  if (r.task) body["task"] = served_to_json(*r.task);
  return reply(http_code(r.status), std::move(body));
}

WireResponse handle_post_annotation(AnnotationStore& store,
                                    const std::string& body) {
  Annotation a;
  try {
    a = annotation_from_json(body);
  } catch (const Error& e) {
    return reply(400, {{"status", "BAD_REQUEST"}, {"message", e.what()}});
  }
  if (a.worker_id.empty()) {
    return reply(400, {{"status", "BAD_REQUEST"}, {"message", "missing worker_id"}});
  }
  const std::string worker = a.worker_id;
  const SubmitResult r = store.submit_annotation(worker, std::move(a));
  json out = {{"status", r.status == ServiceStatus::kOk
                             ? std::string("ACK")
                             : std::string(to_string(r.status))},
              {"revision", r.revision},
              {"worker_active", r.worker_active}};
  if (!r.message.empty()) out["message"] = r.message;
  return reply(http_code(r.status), std::move(out));
}

WireResponse handle_post_question(AnnotationStore& store,
                                  const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("worker_id") ||
      !j.contains("task_id") || !j.contains("question") ||
      !j["question"].is_string()) {
    return reply(400, {{"status", "BAD_REQUEST"},
                       {"message", "expected worker_id, task_id, question"}});
  }
  const SubmitResult r = store.submit_question(
      j["worker_id"].get<std::string>(), j["task_id"].get<std::string>(),
      j["question"].get<std::string>());
  json out = {{"status", r.status == ServiceStatus::kOk
                             ? std::string("ACK")
                             : std::string(to_string(r.status))},
              {"revision", r.revision}};
  if (!r.message.empty()) out["message"] = r.message;
  return reply(http_code(r.status), std::move(out));
}

WireResponse handle_progress(const AnnotationStore& store,
                             const std::string& worker) {
  const Progress p = store.progress();
  json body = {{"status", "OK"},
               {"revision", p.revision},
               {"total", p.total},
               {"assigned", p.assigned},
               {"completed", p.completed},
               {"gold_completed", p.gold_completed},
               {"per_domain", p.completed_per_domain},
               {"workers", p.workers},
               {"active_workers", p.active_workers}};
  if (!worker.empty()) {
    const auto w = store.worker(worker);
    json wj = {{"worker_id", worker},
               {"completed", w ? w->completed : 0},
               {"active", w ? w->status.active : true},
               {"gold_seen", w ? w->status.gold_seen : 0}};
    if (w && w->current_task) wj["current_task"] = *w->current_task;
    body["worker"] = std::move(wj);
  }
  return reply(200, std::move(body));
}

WireResponse handle_review(const ReviewCollection& reviews,
                           const std::string& review_id) {
  const Review* r = reviews.find(review_id);
  if (!r) {
    return reply(404, {{"status", "NOT_FOUND"},
                       {"message", "unknown review " + review_id}});
  }
  json tokens = json::array();
  for (const Token& t : tokenize(r->text)) {
    tokens.push_back({t.byte_start, t.byte_end});
  }
  return reply(200, {{"status", "OK"},
                     {"review_id", r->review_id},
                     {"item_id", r->item_id},
                     {"domain", r->domain.label()},
                     {"text", r->text},
                     {"tokens", std::move(tokens)}});
}

struct AnnotationServer::Impl {
  httplib::Server http;
};

AnnotationServer::AnnotationServer(AnnotationStore& store,
                                   const ReviewCollection& reviews)
    : impl_(std::make_unique<Impl>()) {
  auto send = [](httplib::Response& res, const WireResponse& w) {
    res.status = w.http_status;
    res.set_content(w.body, "application/json");
  };
  auto& http = impl_->http;
  http.Get("/tasks/next", [&store, send](const httplib::Request& req,
                                         httplib::Response& res) {
    send(res, handle_next_task(store, req.get_param_value("worker")));
  });
  http.Post("/annotations", [&store, send](const httplib::Request& req,
                                           httplib::Response& res) {
    send(res, handle_post_annotation(store, req.body));
  });
  http.Post("/questions", [&store, send](const httplib::Request& req,
                                         httplib::Response& res) {
    send(res, handle_post_question(store, req.body));
  });
  http.Get("/progress", [&store, send](const httplib::Request& req,
                                       httplib::Response& res) {
    send(res, handle_progress(store, req.get_param_value("worker")));
  });
  http.Get(R"(/review/([^/]+))", [&reviews, send](const httplib::Request& req,
                                                  httplib::Response& res) {
    send(res, handle_review(reviews, req.matches[1]));
  });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"schema", kWireSchema},
                         {"status", "INTERNAL"},
                         {"message", what}}
                        .dump(),
                    "application/json");
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind_any_port(const std::string& host) {
  return impl_->http.bind_to_any_port(host);
}

bool AnnotationServer::bind(const std::string& host, int port) {
  return impl_->http.bind_to_port(host, port);
}

bool AnnotationServer::listen_after_bind() {
  return impl_->http.listen_after_bind();
}

void AnnotationServer::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace subjqa
