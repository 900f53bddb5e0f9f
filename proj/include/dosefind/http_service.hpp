#pragma once

#include <string>

#include "dosefind/conduct.hpp"

namespace httplib {
class Server;
}

namespace dosefind {

// Error bodies are {"code": ..., "message": ...}.
void register_routes(httplib::Server& server, ConductService& service);

// Blocks until the server stops.
bool serve(ConductService& service, const std::string& host, int port);

}  // namespace dosefind
