import math
from dataclasses import replace

import numpy as np
import pytest

from riscr.config import config_from_mapping
from riscr.harness import (
    RunRecord,
    SUMMARY_LABEL,
    emit_csv,
    gradcheck,
    parse_csv,
    run_experiment,
    run_no_ris_baseline,
    summarize_records,
)
from riscr.pgm import PgmParams
from riscr.sca import ScaParams


def small_config(**overrides):
    mapping = {
        "geometry.ris_rows": 2,
        "geometry.ris_cols": 2,
        "geometry.n_tx": 3,
        "geometry.n_rx": 2,
        "modulation.order": 2,
        "run.n_realizations": 2,
        "run.n_noise": 40,
        "run.final_noise": 80,
        "run.seed": 5,
    }
    mapping.update(overrides)
    cfg = config_from_mapping(mapping)
    return replace(cfg, pgm=PgmParams(max_iters=6), sca=ScaParams(outer_max_iters=6))


def make_record(**overrides):
    base = dict(
        run_id="r",
        method="pgm",
        realization=0,
        iteration=1,
        r0=1.2345,
        mi=1.5,
        mi_stderr=0.01,
        mi_lower_bound=0.7,
        gaussian_rate=2.25,
        f_log=0.5,
    )
    base.update(overrides)
    return RunRecord(**base)


class TestCsv:
    def test_empty_records_header_only(self, tmp_path):
        path = emit_csv([], tmp_path / "empty.csv")
        lines = path.read_text().splitlines()
        assert lines == ["run_id,method,realization,iteration,R0,MI,MI_stderr,MI_lower_bound,gaussian_rate,f_log"]

    def test_round_trip_identity(self, tmp_path):
        records = [
            make_record(r0=0.1 + 0.2, mi=math.pi, iteration=k + 1) for k in range(3)
        ] + [make_record(realization=SUMMARY_LABEL, r0=1 / 3)]
        path = emit_csv(records, tmp_path / "r.csv")
        assert parse_csv(path) == records

    def test_decimal_point_always_dot(self, tmp_path):
        path = emit_csv([make_record(r0=1234.5678)], tmp_path / "d.csv")
        row = path.read_text().splitlines()[1]
        fields = row.split(",")
        assert "." in fields[4] and float(fields[4]) == 1234.5678

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,c\n")
        with pytest.raises(ValueError):
            parse_csv(p)


class TestSummaries:
    def test_means_are_arithmetic_means(self):
        rows = [
            make_record(realization=0, iteration=1, r0=1.0, mi=2.0, f_log=0.1, gaussian_rate=1.0, mi_lower_bound=0.2),
            make_record(realization=0, iteration=2, r0=2.0, mi=3.0, f_log=0.2, gaussian_rate=2.0, mi_lower_bound=0.3),
            make_record(realization=1, iteration=1, r0=5.0, mi=6.0, f_log=0.3, gaussian_rate=3.0, mi_lower_bound=0.4),
        ]
        means = summarize_records(rows)
        assert [m.iteration for m in means] == [1, 2]
        assert means[0].r0 == pytest.approx((1.0 + 5.0) / 2, abs=1e-12)
        # the shorter trace is padded with its final row
        assert means[1].r0 == pytest.approx((2.0 + 5.0) / 2, abs=1e-12)
        assert means[1].mi == pytest.approx((3.0 + 6.0) / 2, abs=1e-12)
        assert means[1].f_log == pytest.approx((0.2 + 0.3) / 2, abs=1e-12)
        assert all(m.realization == SUMMARY_LABEL for m in means)

    def test_experiment_summary_matches_rows(self):
        records = run_experiment(small_config())
        rows = [r for r in records if r.realization != SUMMARY_LABEL]
        means = [r for r in records if r.realization == SUMMARY_LABEL]
        for mean in means:
            arm = sorted(
                (r for r in rows if r.method == mean.method), key=lambda r: (r.realization, r.iteration)
            )
            per_real = {}
            for r in arm:
                per_real.setdefault(r.realization, []).append(r)
            vals = [t[min(mean.iteration - 1, len(t) - 1)].r0 for t in per_real.values()]
            assert mean.r0 == pytest.approx(np.mean(vals), abs=1e-12)


class TestRunExperiment:
    def test_single_iteration_counting(self):
        cfg = small_config(**{"run.n_realizations": 1, "run.mi_every": 0})
        cfg = replace(cfg, pgm=PgmParams(max_iters=1), sca=ScaParams(outer_max_iters=1))
        records = run_experiment(cfg)
        rows = [r for r in records if r.realization != SUMMARY_LABEL]
        assert sorted(r.method for r in rows) == ["pgm", "sca"]
        assert all(r.iteration == 1 for r in rows)

    def test_iterations_contiguous(self):
        records = run_experiment(small_config())
        for method in ("pgm", "sca"):
            rows = [r for r in records if r.method == method and r.realization == 0]
            assert [r.iteration for r in rows] == list(range(1, len(rows) + 1))

    def test_byte_identical_reruns(self, tmp_path):
        cfg = small_config()
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run_experiment(cfg, csv_path=a)
        run_experiment(cfg, csv_path=b)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a = run_experiment(small_config())
        b = run_experiment(small_config(**{"run.seed": 6}))
        assert a != b

    def test_mi_budget_fields(self):
        records = run_experiment(small_config(**{"run.mi_every": 0}))
        rows = [r for r in records if r.realization != SUMMARY_LABEL]
        finals = {}
        for r in rows:
            key = (r.method, r.realization)
            if key not in finals or r.iteration > finals[key].iteration:
                finals[key] = r
        for r in rows:
            if r is finals[(r.method, r.realization)]:
                assert not math.isnan(r.mi)  # final point re-evaluated
            else:
                assert math.isnan(r.mi)


class TestNoRisBaseline:
    def test_blocked_and_no_ris_is_zero_rate(self):
        cfg = small_config(**{"run.direct_blocked": "true", "run.method": "pgm"})
        records = run_no_ris_baseline(cfg)
        rows = [r for r in records if r.realization != SUMMARY_LABEL]
        assert rows and all(r.method == "pgm_noris" for r in rows)
        for r in rows:
            assert r.r0 == pytest.approx(0.0, abs=1e-12)
            assert abs(r.mi) <= 3 * r.mi_stderr + 1e-9

    def test_with_ris_beats_without_on_matched_realizations(self):
        cfg = small_config(**{"run.method": "pgm", "run.mi_every": 0})
        cfg = replace(cfg, pgm=PgmParams(max_iters=30))
        with_ris = run_experiment(cfg)
        without = run_no_ris_baseline(cfg)

        def final_r0(records, method):
            out = {}
            for r in records:
                if r.realization == SUMMARY_LABEL or r.method != method:
                    continue
                if r.realization not in out or r.iteration > out[r.realization][0]:
                    out[r.realization] = (r.iteration, r.r0)
            return {k: v[1] for k, v in out.items()}

        ris = final_r0(with_ris, "pgm")
        base = final_r0(without, "pgm_noris")
        assert set(ris) == set(base)
        for realization in ris:
            assert ris[realization] > base[realization]


class TestGradcheck:
    def test_default_small_instance_passes(self):
        cfg = small_config()
        report = gradcheck(cfg, n_points=5)
        assert report.passed
        assert report.max_rel_theta < 1e-5
        assert report.max_rel_p < 1e-5

    def test_reference_scale_rejected(self):
        with pytest.raises(ValueError):
            gradcheck(config_from_mapping({}))  # 225 surface elements

    def test_large_noise_linearization_sanity(self):
        # with huge sigma^2 every pair weight is ~1, so the gradient reduces
        # to the unweighted sum of pair-distance gradients
        import helpers
        from riscr.pgm import grad_theta
        from riscr.sca import linearize_phi_theta

        rng = np.random.default_rng(0)
        channels, table, point, _ = helpers.make_instance(rng)
        sigma2 = 1e8
        lin = linearize_phi_theta(point.theta, point.precoder, channels, table)
        unweighted = -(table.gram_counts[1:] @ lin.coeffs[1:]) / (4 * sigma2)
        analytic = grad_theta(point.theta, point.precoder, channels, table, sigma2)
        assert np.linalg.norm(analytic - unweighted) / np.linalg.norm(unweighted) < 1e-3
