#include "khclust/reclass.hpp"

#include <cmath>
#include <string>

namespace kh {

namespace {

void require_nonempty(const ClusterStats& s, const char* what) {
    if (s.n == 0) {
        throw PreconditionError(std::string(what) + " cluster is empty");
    }
}

void require_partial(const ClusterStats& sub, const ClusterStats& donor) {
    require_nonempty(sub, "subset");
    require_nonempty(donor, "donor");
    if (sub.n == donor.n) {
        throw PreconditionError("subset is the whole donor (k = n1); use delta_e_merge");
    }
    if (sub.n > donor.n) {
        throw PreconditionError("subset larger than donor (k > n1)");
    }
}

}  // namespace

double delta_e_merge(const ClusterStats& a, const ClusterStats& b) {
    require_nonempty(a, "first");
    require_nonempty(b, "second");
    const auto ia = a.centroid();
    const auto ib = b.centroid();
    const double n1 = static_cast<double>(a.n);
    const double n2 = static_cast<double>(b.n);
    return squared_distance(ia, ib) / (1.0 / n1 + 1.0 / n2);
}

double delta_e_correct(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor) {
    require_partial(sub, donor);
    require_nonempty(acceptor, "acceptor");
    const auto i = sub.centroid();
    const auto i1 = donor.centroid();
    const auto i2 = acceptor.centroid();
    return detail::correct_delta(static_cast<double>(sub.n), i, static_cast<double>(donor.n), i1,
                                 static_cast<double>(acceptor.n), i2);
}

DeltaE reclass_delta(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor) {
    require_nonempty(sub, "subset");
    if (sub.n > donor.n) {
        throw PreconditionError("subset larger than donor (k > n1)");
    }
    if (sub.n == donor.n) {
        return {delta_e_merge(donor, acceptor), DeltaKind::merge};
    }
    return {delta_e_correct(sub, donor, acceptor), DeltaKind::correct};
}

double alpha(std::size_t k, std::size_t n1, std::size_t n2) {
    if (k < 1 || k > n1 || n2 < 1) {
        throw PreconditionError("alpha needs 1 <= k <= n1 and n2 >= 1");
    }
    const double num = static_cast<double>(n2) * static_cast<double>(n1 - k);
    const double den = static_cast<double>(n1) * static_cast<double>(n2 + k);
    return std::sqrt(num / den);
}

bool correction_improves(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor) {
    require_partial(sub, donor);
    require_nonempty(acceptor, "acceptor");
    const auto i = sub.centroid();
    const double to_donor = squared_distance(i, donor.centroid());
    const double to_acceptor = squared_distance(i, acceptor.centroid());
    const double k = static_cast<double>(sub.n);
    const double n1 = static_cast<double>(donor.n);
    const double n2 = static_cast<double>(acceptor.n);
    // |I - I1|^2 > alpha^2 |I - I2|^2 with alpha^2 = n2 (n1 - k) / (n1 (n2 + k)).
    return to_donor * n1 * (n2 + k) > to_acceptor * n2 * (n1 - k);
}

bool is_stable_move(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor) {
    return !correction_improves(sub, donor, acceptor);
}

double merge_many(std::span<const ClusterStats> clusters) {
    if (clusters.size() < 2) {
        throw PreconditionError("merge_many needs at least two clusters");
    }
    std::vector<std::vector<double>> means;
    means.reserve(clusters.size());
    double total = 0;
    for (const auto& c : clusters) {
        require_nonempty(c, "merged");
        means.push_back(c.centroid());
        total += static_cast<double>(c.n);
    }
    double acc = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        for (std::size_t j = i + 1; j < clusters.size(); ++j) {
            acc += static_cast<double>(clusters[i].n) * static_cast<double>(clusters[j].n) *
                   squared_distance(means[i], means[j]);
        }
    }
    return acc / total;
}

double gap_identity(const ClusterStats& sub, const ClusterStats& donor, const ClusterStats& acceptor) {
    require_partial(sub, donor);
    require_nonempty(acceptor, "acceptor");
    const double a = alpha(sub.n, donor.n, acceptor.n);
    const auto i = sub.centroid();
    const auto i1 = donor.centroid();
    const auto i2 = acceptor.centroid();
    double norm2 = 0;
    for (std::size_t j = 0; j < i.size(); ++j) {
        const double t = a * (i[j] - i2[j]) - (i[j] - i1[j]) / a;
        norm2 += t * t;
    }
    return norm2 / (1.0 / static_cast<double>(donor.n) + 1.0 / static_cast<double>(acceptor.n));
}

}  // namespace kh
