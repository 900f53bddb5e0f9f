#include "dosefind/http_service.hpp"

#include <httplib.h>

namespace dosefind {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError("invalid_json", 400, e.what());
  }
}

template <class F>
httplib::Server::Handler wrap(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status, e.code, e.what());
    } catch (const InputError& e) {
      send_error(res, 400, "invalid_request", e.what());
    } catch (const UnsupportedError& e) {
      send_error(res, 422, "unsupported", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, ConductService& service) {
  auto& svc = service;
  server.Post("/sessions", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
                std::string id = svc.create_session(parse_body(req));
                send_json(res, 201, {{"id", id}, {"state", svc.get(id)->state()}});
              }));
  server.Get("/sessions", wrap([&svc](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, {{"sessions", svc.ids()}});
             }));
  server.Get(R"(/sessions/([^/]+))", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, svc.get(req.matches[1])->state());
             }));
  server.Post(R"(/sessions/([^/]+)/enrollments)", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 201, svc.get(req.matches[1])->enroll(parse_body(req)));
              }));
  server.Post(R"(/sessions/([^/]+)/outcomes)", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 201, svc.get(req.matches[1])->outcome(parse_body(req)));
              }));
  server.Get(R"(/sessions/([^/]+)/recommendation)", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
               std::optional<double> at;
               if (req.has_param("at")) {
                 try {
                   std::size_t used = 0;
                   std::string v = req.get_param_value("at");
                   at = std::stod(v, &used);
                   if (used != v.size()) throw std::invalid_argument(v);
                 } catch (const std::exception&) {
                   throw ServiceError("invalid_request", 400, "`at` must be a number");
                 }
               }
               send_json(res, 200, svc.get(req.matches[1])->recommendation(at));
             }));
  server.Post(R"(/sessions/([^/]+)/what-if)", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, svc.get(req.matches[1])->what_if(parse_body(req)));
              }));
  server.Post(R"(/sessions/([^/]+)/complete)", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, svc.get(req.matches[1])->complete(parse_body(req)));
              }));
  server.Get(R"(/sessions/([^/]+)/audit)", wrap([&svc](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, svc.get(req.matches[1])->audit());
             }));
}

bool serve(ConductService& service, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, service);
  return server.listen(host, port);
}

}  // namespace dosefind
