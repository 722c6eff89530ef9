#ifndef SUBJQA_SERVER_HPP_
#define SUBJQA_SERVER_HPP_

#include <memory>
#include <string>

#include "subjqa/corpus.hpp"
#include "subjqa/store.hpp"

namespace subjqa {

inline constexpr const char* kWireSchema = "subjqa.wire.v1";

// HTTP front end of an AnnotationStore.
//
//   GET  /tasks/next?worker=ID   next task in the worker's stream
//   POST /annotations            span annotation (subjqa.annotation.v1)
//   POST /questions              written question {worker_id, task_id, question}
//   GET  /progress[?worker=ID]   store counts, optionally one worker's standing
//   GET  /review/{id}            review text plus token byte offsets
//
// Every response body is a JSON object carrying "schema" and "status".
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, const ReviewCollection& reviews);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds to an ephemeral port; returns it (or -1).
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  // Blocks until stop() is called.
  bool listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Request handlers without the transport, exposed for tests.
struct WireResponse {
  int http_status = 200;
  std::string body;
};

WireResponse handle_next_task(AnnotationStore& store, const std::string& worker);
WireResponse handle_post_annotation(AnnotationStore& store,
                                    const std::string& body);
WireResponse handle_post_question(AnnotationStore& store,
                                  const std::string& body);
WireResponse handle_progress(const AnnotationStore& store,
                             const std::string& worker);
WireResponse handle_review(const ReviewCollection& reviews,
                           const std::string& review_id);

}  // namespace subjqa

#endif  // SUBJQA_SERVER_HPP_
