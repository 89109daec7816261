#include "seqcal/testbeds.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <sstream>

namespace seqcal {

double eval_sine2d(double x, double theta) { return std::sin(10.0 * x - 5.0 * theta); }

double eval_ranjan3d(double x1, double x2, double theta) {
    return (30.0 + 5.0 * x1 * std::sin(5.0 * x1)) *
           (6.0 * theta + 1.0 + std::exp(-5.0 * x2));
}

double eval_highdim(const VectorXd& x, const VectorXd& theta) {
    return std::sqrt(x.sum()) * theta.sum() * theta.sum();
}

SyntheticModel SyntheticModel::sine2d(bool with_discrepancy) {
    SyntheticModel m;
    m.id = TestbedId::Sine2D;
    m.q = 1;
    m.p = 1;
    m.discrepancy = with_discrepancy;
    m.sigma = 0.2;
    m.theta_true = VectorXd::Constant(1, M_PI / 5.0);
    m.theta_box = BoxScaling::unit(1);
    for (double x : {0.1, 0.3, 0.5, 0.7, 0.9})
        m.field_unique.push_back(VectorXd::Constant(1, x));
    m.replicates = 2;
    return m;
}

SyntheticModel SyntheticModel::ranjan3d(bool with_discrepancy) {
    SyntheticModel m;
    m.id = TestbedId::Ranjan3D;
    m.q = 2;
    m.p = 1;
    m.discrepancy = with_discrepancy;
    m.sigma = 0.5;
    m.theta_true = VectorXd::Constant(1, 0.5);
    m.theta_box = BoxScaling::unit(1);
    for (double a : {0.25, 0.5, 0.75})
        for (double b : {0.25, 0.5, 0.75}) {
            VectorXd x(2);
            x << a, b;
            m.field_unique.push_back(x);
        }
    m.replicates = 2;
    return m;
}

SyntheticModel SyntheticModel::highdim(int q, int p) {
    if (q < 1 || p < 1) throw std::invalid_argument("highdim: q, p >= 1");
    SyntheticModel m;
    m.id = TestbedId::HighDim;
    m.q = q;
    m.p = p;
    m.discrepancy = false;
    // Noise variances 25 / 5 / 1 for the q=2 / q=6 / q=10 scenarios.
    m.sigma = q <= 2 ? 5.0 : (q <= 6 ? std::sqrt(5.0) : 1.0);
    m.theta_true = VectorXd::Zero(p);
    m.theta_box =
        BoxScaling(VectorXd::Constant(p, -5.0), VectorXd::Constant(p, 5.0));
    m.field_unique.assign(1, VectorXd::Constant(q, 0.5));
    m.replicates = 4;
    return m;
}

SyntheticModel SyntheticModel::by_name(const std::string& name) {
    if (name == "sine2d") return sine2d(false);
    if (name == "sine2d_disc") return sine2d(true);
    if (name == "ranjan3d") return ranjan3d(false);
    if (name == "ranjan3d_disc") return ranjan3d(true);
    if (name == "highdim_q2p10") return highdim(2, 10);
    if (name == "highdim_q6p6") return highdim(6, 6);
    if (name == "highdim_q10p2") return highdim(10, 2);
    throw std::invalid_argument("unknown testbed: " + name);
}

double SyntheticModel::eval(const VectorXd& x, const VectorXd& theta) const {
    switch (id) {
        case TestbedId::Sine2D: return eval_sine2d(x(0), theta(0));
        case TestbedId::Ranjan3D: return eval_ranjan3d(x(0), x(1), theta(0));
        case TestbedId::HighDim: return eval_highdim(x, theta);
    }
    throw std::logic_error("SyntheticModel::eval: bad id");
}

double SyntheticModel::bias(const VectorXd& x) const {
    if (!discrepancy) return 0.0;
    switch (id) {
        case TestbedId::Sine2D:
            return 1.0 - x(0) / 3.0 - 2.0 * x(0) * x(0) / 3.0;
        case TestbedId::Ranjan3D:
            return -50.0 * std::exp(-0.2 * x(0) - 0.1 * x(1));
        case TestbedId::HighDim: return 0.0;
    }
    throw std::logic_error("SyntheticModel::bias: bad id");
}

double SyntheticModel::true_field_mean(const VectorXd& x) const {
    return eval(x, theta_true) + bias(x);
}

Simulator SyntheticModel::simulator() const {
    SyntheticModel copy = *this;
    return [copy](const JointInput& z) {
        return copy.eval(z.design, copy.theta_box.from_unit(z.params));
    };
}

FieldExperiment make_field_data(const SyntheticModel& m, Rng& rng) {
    FieldExperiment fe;
    std::normal_distribution<double> noise(0.0, m.sigma);
    for (const auto& x : m.field_unique)
        for (int r = 0; r < m.replicates; ++r) fe.field_x.push_back(x);
    const int d = static_cast<int>(fe.field_x.size());
    fe.y.resize(d);
    for (int i = 0; i < d; ++i)
        fe.y(i) = m.true_field_mean(fe.field_x[i]) + noise(rng);
    fe.Sigma = m.sigma * m.sigma * MatrixXd::Identity(d, d);
    fe.prior = PriorSpec::uniform(m.p);
    return fe;
}

// ---------------------------------------------------------------------------
// External simulator client

struct ExternalSimulator::Impl {
    ExternalSimSpec spec;
    pid_t pid = -1;
    int to_child = -1;    // write end
    int from_child = -1;  // read end
    std::string buffer;   // unconsumed bytes from the child

    ~Impl() { shutdown(); }

    void shutdown() {
        if (to_child >= 0) close(to_child);
        if (from_child >= 0) close(from_child);
        to_child = from_child = -1;
        if (pid > 0) {
            int status = 0;
            if (waitpid(pid, &status, WNOHANG) == 0) {
                kill(pid, SIGTERM);
                waitpid(pid, &status, 0);
            }
            pid = -1;
        }
    }

    void check_child_alive() {
        if (pid <= 0) throw SimCrashed("external simulator not running");
        int status = 0;
        if (waitpid(pid, &status, WNOHANG) == pid) {
            pid = -1;
            throw SimCrashed("external simulator exited");
        }
    }

    void spawn() {
        // A dead child must surface as an EPIPE write error, not a fatal signal.
        signal(SIGPIPE, SIG_IGN);
        int in_pipe[2], out_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
            throw SimCrashed("pipe() failed");
        pid = fork();
        if (pid < 0) throw SimCrashed("fork() failed");
        if (pid == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            if (!spec.workdir.empty() && chdir(spec.workdir.c_str()) != 0) _exit(127);
            std::vector<char*> argv;
            for (auto& a : spec.command) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            execvp(argv[0], argv.data());
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        to_child = in_pipe[1];
        from_child = out_pipe[0];

        write_line("SEQCAL/1");
        const std::string reply = read_line();
        if (reply != "OK") throw SimProtocol("bad handshake reply: " + reply);
    }

    void write_line(const std::string& line) {
        const std::string data = line + "\n";
        size_t off = 0;
        while (off < data.size()) {
            const ssize_t k = write(to_child, data.data() + off, data.size() - off);
            if (k < 0) {
                if (errno == EINTR) continue;
                check_child_alive();
                throw SimCrashed("write to external simulator failed");
            }
            off += static_cast<size_t>(k);
        }
    }

    std::string read_line() {
        const auto deadline_ms = static_cast<int>(spec.timeout_sec * 1000.0);
        auto elapsed_ms = 0;
        for (;;) {
            const auto nl = buffer.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            struct pollfd pf = {from_child, POLLIN, 0};
            const int step = 50;
            const int r = poll(&pf, 1, step);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw SimCrashed("poll failed");
            }
            if (r == 0) {
                elapsed_ms += step;
                if (elapsed_ms >= deadline_ms)
                    throw SimTimeout("external simulator timed out");
                continue;
            }
            char chunk[4096];
            const ssize_t k = read(from_child, chunk, sizeof(chunk));
            if (k < 0) {
                if (errno == EINTR) continue;
                throw SimCrashed("read from external simulator failed");
            }
            if (k == 0) {
                check_child_alive();
                throw SimCrashed("external simulator closed its output");
            }
            buffer.append(chunk, static_cast<size_t>(k));
        }
    }
};

ExternalSimulator::ExternalSimulator(ExternalSimSpec spec)
    : impl_(std::make_unique<Impl>()) {
    if (spec.command.empty())
        throw std::invalid_argument("ExternalSimSpec: empty command");
    if (!(spec.timeout_sec > 0.0))
        throw std::invalid_argument("ExternalSimSpec: timeout must be positive");
    impl_->spec = std::move(spec);
    impl_->spawn();
}

ExternalSimulator::~ExternalSimulator() = default;

double ExternalSimulator::eval(const JointInput& z) {
    impl_->check_child_alive();
    std::ostringstream os;
    os.precision(17);
    os << z.q() << " " << z.p();
    for (int i = 0; i < z.q(); ++i) os << " " << z.design(i);
    for (int i = 0; i < z.p(); ++i) os << " " << z.params(i);
    impl_->write_line(os.str());
    const std::string line = impl_->read_line();
    try {
        size_t pos = 0;
        const double v = std::stod(line, &pos);
        while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
            ++pos;
        if (pos != line.size()) throw std::invalid_argument("trailing data");
        return v;
    } catch (const std::exception&) {
        throw SimProtocol("non-numeric reply: " + line);
    }
}

}  // namespace seqcal
