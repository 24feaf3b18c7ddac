#include "peer/server.hpp"

#include <condition_variable>
#include <deque>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "peer/error.hpp"

namespace peer {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

struct Target {
    std::vector<std::string> segments;
    std::map<std::string, std::string> query;
};

Target parse_target(std::string_view target) {
    Target t;
    const auto q = target.find('?');
    std::string_view path = target.substr(0, q);
    while (!path.empty()) {
        const auto start = path.find_first_not_of('/');
        if (start == std::string_view::npos) break;
        path.remove_prefix(start);
        const auto end = path.find('/');
        t.segments.emplace_back(path.substr(0, end));
        if (end == std::string_view::npos) break;
        path.remove_prefix(end);
    }
    if (q != std::string_view::npos) {
        std::string_view rest = target.substr(q + 1);
        while (!rest.empty()) {
            const auto amp = rest.find('&');
            const auto pair = rest.substr(0, amp);
            const auto eq = pair.find('=');
            t.query.emplace(std::string(pair.substr(0, eq)),
                            eq == std::string_view::npos ? std::string{} : std::string(pair.substr(eq + 1)));
            if (amp == std::string_view::npos) break;
            rest.remove_prefix(amp + 1);
        }
    }
    return t;
}

http::status status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Validation: return http::status::bad_request;
    case ErrorCode::NotFound: return http::status::not_found;
    case ErrorCode::Conflict: return http::status::conflict;
    case ErrorCode::Forbidden: return http::status::forbidden;
    case ErrorCode::Internal: return http::status::internal_server_error;
    }
    return http::status::internal_server_error;
}

Response make_response(const Request& req, http::status status, const json& body) {
    Response res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
}

Response error_response(const Request& req, http::status status, std::string_view code, const std::string& message) {
    return make_response(req, status, {{"error", {{"code", code}, {"message", message}}}});
}

json body_of(const Request& req) {
    if (req.body().empty()) return json::object();
    json j = json::parse(req.body(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw validation_error("request body must be a JSON object");
    return j;
}

json events_json(const std::vector<SessionEvent>& events) {
    json arr = json::array();
    for (const auto& e : events) arr.push_back(e.to_json());
    return arr;
}

PlayerId authenticate(const Request& req, const Session& session) {
    const auto it = req.find("X-Player-Token");
    if (it == req.end()) throw Error(ErrorCode::Forbidden, "missing X-Player-Token");
    auto player = session.player_for_token(std::string(it->value()));
    if (!player) throw Error(ErrorCode::Forbidden, "unknown player token");
    return *player;
}

class Router {
public:
    explicit Router(SessionRegistry& registry) : registry_(registry) {}

    Response handle(const Request& req) {
        try {
            return route(req);
        } catch (const Error& e) {
            return error_response(req, status_for(e.code()), to_string(e.code()), e.what());
        } catch (const json::exception& e) {
            return error_response(req, http::status::bad_request, "validation", e.what());
        } catch (const std::exception& e) {
            return error_response(req, http::status::internal_server_error, "internal", e.what());
        }
    }

private:
    Response route(const Request& req) {
        if (req.method() == http::verb::options) {
            Response res{http::status::no_content, req.version()};
            res.set(http::field::access_control_allow_origin, "*");
            res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
            res.set(http::field::access_control_allow_headers, "Content-Type, X-Player-Token");
            res.keep_alive(req.keep_alive());
            res.prepare_payload();
            return res;
        }
        const Target t = parse_target(std::string(req.target()));
        const auto& seg = t.segments;
        const bool get = req.method() == http::verb::get;
        const bool post = req.method() == http::verb::post;

        if (seg.size() == 1 && seg[0] == "health" && get) {
            return make_response(req, http::status::ok, {{"status", "ok"}});
        }
        if (seg.empty() || seg[0] != "sessions") {
            throw not_found("no route for " + std::string(req.target()));
        }
        if (seg.size() == 1) {
            if (get) return make_response(req, http::status::ok, {{"sessions", registry_.ids()}});
            if (post) return create(req);
            return method_not_allowed(req);
        }
        auto session = registry_.get(seg[1]);
        if (seg.size() == 2) throw not_found("no route for " + std::string(req.target()));
        const std::string& action = seg[2];
        if (seg.size() != 3) throw not_found("no route for " + std::string(req.target()));

        if (action == "state" && get) {
            return make_response(req, http::status::ok, session->state().to_json());
        }
        if (!post) return method_not_allowed(req);
        const json body = body_of(req);
        if (action == "players") {
            std::optional<std::string> name;
            if (body.contains("name") && !body["name"].is_null()) name = body["name"].get<std::string>();
            const Participant p = session->register_player(name);
            return make_response(req, http::status::created,
                                 {{"player_id", p.id.str()}, {"name", p.name}, {"token", session->player_token(p.id)}});
        }
        if (action == "stance") {
            const PlayerId player = authenticate(req, *session);
            const auto stance = parse_stance(body.at("stance").get<std::string>());
            if (!stance) throw validation_error("stance must be Agree or Disagree");
            if (!body.at("confidence").is_number_integer()) throw validation_error("confidence must be an integer");
            const auto events = session->submit_stance({player, *stance, body["confidence"].get<int>()});
            return make_response(req, http::status::ok, {{"events", events_json(events)}});
        }
        if (action == "utterance") {
            const PlayerId player = authenticate(req, *session);
            const auto events = session->post_utterance(player, body.at("text").get<std::string>());
            return make_response(req, http::status::ok, {{"events", events_json(events)}});
        }
        if (action == "close") {
            const auto events = session->close(body.value("reason", std::string("closed")));
            return make_response(req, http::status::ok, {{"events", events_json(events)}});
        }
        throw not_found("no route for " + std::string(req.target()));
    }

    Response create(const Request& req) {
        const json body = body_of(req);
        std::optional<EngineConfig> config;
        if (body.contains("config")) config = EngineConfig::from_json(body["config"], registry_.options().config);
        std::optional<std::uint64_t> seed;
        if (body.contains("seed")) seed = body["seed"].get<std::uint64_t>();
        const std::string id = registry_.create_session(body.at("dilemma_id").get<std::string>(), config, seed);
        const SessionState st = registry_.get(id)->state();
        return make_response(req, http::status::created,
                             {{"session_id", id},
                              {"status", std::string(to_string(st.status))},
                              {"dilemma", to_json(st.dilemma)},
                              {"seed", st.seed}});
    }

    static Response method_not_allowed(const Request& req) {
        return error_response(req, http::status::method_not_allowed, "method_not_allowed",
                              "method not allowed for " + std::string(req.target()));
    }

    SessionRegistry& registry_;
};

class EventStream : public std::enable_shared_from_this<EventStream> {
public:
    EventStream(tcp::socket&& socket, std::shared_ptr<Session> session, std::uint64_t after)
        : ws_(std::move(socket)), session_(std::move(session)), after_(after) {}

    ~EventStream() {
        if (listener_) session_->unsubscribe(*listener_);
    }

    void run(Request req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&EventStream::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        std::weak_ptr<EventStream> weak = shared_from_this();
        auto executor = ws_.get_executor();
        auto [backlog, id] = session_->subscribe(
            [weak, executor](const SessionEvent& e) {
                net::post(executor, [weak, line = e.to_line()]() mutable {
                    if (auto self = weak.lock()) self->enqueue(std::move(line));
                });
            },
            after_);
        listener_ = id;
        for (const auto& e : backlog) enqueue(e.to_line());
        do_read();
    }

    void do_read() {
        ws_.async_read(inbound_, beast::bind_front_handler(&EventStream::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            if (listener_) session_->unsubscribe(*listener_);
            listener_.reset();
            return;
        }
        inbound_.consume(inbound_.size());
        do_read();
    }

    void enqueue(std::string line) {
        queue_.push_back(std::move(line));
        if (queue_.size() == 1) do_write();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()),
                        beast::bind_front_handler(&EventStream::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) return;
        queue_.pop_front();
        if (!queue_.empty()) do_write();
    }

    websocket::stream<beast::tcp_stream> ws_;
    std::shared_ptr<Session> session_;
    std::uint64_t after_;
    std::optional<std::uint64_t> listener_;
    beast::flat_buffer inbound_;
    std::deque<std::string> queue_;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket&& socket, SessionRegistry& registry)
        : stream_(std::move(socket)), registry_(registry) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
    }

private:
    void do_read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(60));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (websocket::is_upgrade(req_)) {
            upgrade();
            return;
        }
        response_ = Router(registry_).handle(req_);
        http::async_write(stream_, response_,
                          beast::bind_front_handler(&HttpConnection::on_write, shared_from_this()));
    }

    void upgrade() {
        const Target t = parse_target(std::string(req_.target()));
        std::shared_ptr<Session> session;
        std::uint64_t after = 0;
        try {
            if (t.segments.size() != 3 || t.segments[0] != "sessions" || t.segments[2] != "events") {
                throw not_found("no event stream at " + std::string(req_.target()));
            }
            session = registry_.get(t.segments[1]);
            if (auto it = t.query.find("after"); it != t.query.end()) after = std::stoull(it->second);
        } catch (const Error& e) {
            response_ = error_response(req_, status_for(e.code()), to_string(e.code()), e.what());
        } catch (const std::exception& e) {
            response_ = error_response(req_, http::status::bad_request, "validation", e.what());
        }
        if (!session) {
            response_.keep_alive(false);
            http::async_write(stream_, response_,
                              beast::bind_front_handler(&HttpConnection::on_write, shared_from_this()));
            return;
        }
        stream_.expires_never();
        std::make_shared<EventStream>(stream_.release_socket(), std::move(session), after)->run(std::move(req_));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) return;
        if (!response_.keep_alive()) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        do_read();
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    Request req_;
    Response response_;
    SessionRegistry& registry_;
};

} // namespace

struct ApiServer::Impl {
    Impl(SessionRegistry& r, ServerOptions o)
        : registry(r), options(std::move(o)), ioc(std::max(1, options.threads)), acceptor(ioc), signals(ioc) {}

    void accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec == net::error::operation_aborted) return;
            } else {
                std::make_shared<HttpConnection>(std::move(socket), registry)->run();
            }
            accept();
        });
    }

    void heartbeat_loop() {
        std::unique_lock lock(mu);
        while (!stopped) {
            cv.wait_for(lock, std::chrono::milliseconds(250));
            if (stopped) break;
            lock.unlock();
            registry.tick_heartbeats(std::chrono::steady_clock::now());
            lock.lock();
        }
    }

    void stop() {
        {
            std::lock_guard lock(mu);
            if (stopped) return;
            stopped = true;
        }
        cv.notify_all();
        ioc.stop();
    }

    void join() {
        for (auto& t : threads) {
            if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
        }
        if (heartbeat.joinable() && heartbeat.get_id() != std::this_thread::get_id()) heartbeat.join();
    }

    SessionRegistry& registry;
    ServerOptions options;
    net::io_context ioc;
    tcp::acceptor acceptor;
    net::signal_set signals;
    std::vector<std::thread> threads;
    std::thread heartbeat;
    std::mutex mu;
    std::condition_variable cv;
    bool started = false;
    bool stopped = false;
};

ApiServer::ApiServer(SessionRegistry& registry, ServerOptions options)
    : impl_(std::make_unique<Impl>(registry, std::move(options))) {}

ApiServer::~ApiServer() {
    stop();
    impl_->join();
}

std::uint16_t ApiServer::start() {
    Impl& s = *impl_;
    if (s.started) throw conflict("server already started");
    const tcp::endpoint endpoint{net::ip::make_address(s.options.address), s.options.port};
    s.acceptor.open(endpoint.protocol());
    s.acceptor.set_option(net::socket_base::reuse_address(true));
    s.acceptor.bind(endpoint);
    s.acceptor.listen(net::socket_base::max_listen_connections);
    s.started = true;
    s.accept();
    if (s.options.handle_signals) {
        s.signals.add(SIGINT);
        s.signals.add(SIGTERM);
        s.signals.async_wait([&s](beast::error_code, int) { s.stop(); });
    }
    for (int i = 0; i < std::max(1, s.options.threads); ++i) {
        s.threads.emplace_back([&s] { s.ioc.run(); });
    }
    s.heartbeat = std::thread([&s] { s.heartbeat_loop(); });
    return s.acceptor.local_endpoint().port();
}

void ApiServer::stop() {
    impl_->stop();
}

void ApiServer::wait() {
    {
        std::unique_lock lock(impl_->mu);
        impl_->cv.wait(lock, [this] { return impl_->stopped; });
    }
    impl_->join();
}

} // namespace peer
