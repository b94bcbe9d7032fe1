import math

import numpy as np
import pytest

from mplc_usd.errors import DegenerateInput, InvalidArgument
from mplc_usd.experiment import (
    Geometry,
    apply_correction,
    build_sorter,
    classification_accuracy,
    confusion_matrix,
    corrected_matrix,
    correction_vector,
    detector_for,
    error_probability,
    image_design,
    image_usd,
    integrate,
    make_detector,
    normalize_rows,
    run_report,
    simulate_outcomes,
    sorter_fields,
    spot_centers,
    usd_vs_mesd_report,
)
from mplc_usd.mplc import WFMOptions
from mplc_usd.optics import Field, gaussian_spot, gram_matrix, hermite_gaussian
from mplc_usd.states import ideal_outcome_matrix, symmetric_states, theta_for_fidelity


class TestGeometry:
    def test_default_radius_keeps_disks_apart(self):
        g = Geometry()
        for d in range(2, 9):
            c = spot_centers(g.grid(), d + 1, g.radius_for(d + 1))
            make_detector(g.grid(), c, g.detector_factor * g.spot_waist)

    def test_explicit_radius_is_respected(self):
        assert Geometry(spot_radius=1e-4).radius_for(9) == 1e-4

    def test_centers_are_on_pixels(self):
        g = Geometry()
        grid = g.grid()
        for x, y in spot_centers(grid, 5, 123.4e-6):
            assert x / grid.pitch == pytest.approx(round(x / grid.pitch))
            assert y / grid.pitch == pytest.approx(round(y / grid.pitch))


class TestSorterFields:
    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_shapes_and_norms(self, d, tiny_geometry):
        des = sorter_fields(d, 0.3, tiny_geometry)
        assert len(des.inputs) == d and len(des.targets) == d and len(des.spots) == d + 1
        for f in des.inputs + des.targets:
            assert f.power() == pytest.approx(1.0, abs=1e-6)
        S = gram_matrix(des.spots)
        assert np.max(np.abs(S - np.eye(d + 1)) ** 2) < 1e-4

    def test_inputs_reproduce_state_overlaps(self, tiny_geometry):
        des = sorter_fields(3, 0.5, tiny_geometry)
        assert np.allclose(gram_matrix(des.inputs), des.states.gram(), atol=1e-6)

    def test_orthogonal_case_targets_are_spots(self, tiny_geometry):
        des = sorter_fields(3, 0.0, tiny_geometry)
        for t, s in zip(des.targets, des.spots):
            assert abs(np.vdot(t.amplitude, s.amplitude) * t.grid.pitch**2) == pytest.approx(1.0, abs=1e-6)

    def test_targets_preserve_input_geometry(self, tiny_geometry):
        des = sorter_fields(4, 0.4, tiny_geometry)
        # spots on the small test grid overlap at the 1e-3 level
        assert np.allclose(gram_matrix(des.targets), gram_matrix(des.inputs), atol=2e-3)

    def test_ambiguous_spot_share(self, tiny_geometry):
        F = 0.34
        des = sorter_fields(3, F, tiny_geometry)
        amb = des.spots[-1]
        for t in des.targets:
            share = abs(np.vdot(amb.amplitude, t.amplitude) * amb.grid.pitch**2) ** 2
            assert share == pytest.approx(math.sqrt(F), abs=1e-4)

    @pytest.mark.parametrize("d,F", [(1, 0.5), (9, 0.5), (3, 1.0), (3, -0.1)])
    def test_preconditions(self, d, F, tiny_geometry):
        with pytest.raises(InvalidArgument):
            sorter_fields(d, F, tiny_geometry)


class TestDetection:
    def test_overlapping_disks_rejected(self, small_grid):
        with pytest.raises(InvalidArgument):
            make_detector(small_grid, [(0.0, 0.0), (30e-6, 0.0)], 20e-6)

    def test_disk_captures_spot_energy(self, tiny_geometry):
        des = sorter_fields(3, 0.0, tiny_geometry)
        det = detector_for(des)
        P = integrate(det, des.spots)
        assert np.all(np.diag(P) >= 0.98)

    @pytest.mark.parametrize("F", [0.0, 0.3, 0.8])
    def test_ideal_injection_reproduces_ideal_matrix(self, F, tiny_geometry):
        des = sorter_fields(3, F, tiny_geometry)
        out = simulate_outcomes(des, ideal=True)
        assert np.max(np.abs(out.normalized - ideal_outcome_matrix(des.measurement))) < 1e-6
        assert np.allclose(out.normalized.sum(axis=1), 1.0, atol=1e-9)

    def test_untrained_design_rejected(self, tiny_geometry):
        with pytest.raises(InvalidArgument):
            simulate_outcomes(sorter_fields(3, 0.2, tiny_geometry))

    def test_normalize_rows_rejects_dark_row(self):
        with pytest.raises(InvalidArgument):
            normalize_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestDataProcessing:
    def ideal(self, d=3, F=0.5):
        return ideal_outcome_matrix(symmetric_states(d, theta_for_fidelity(d, F)))

    def test_correction_on_equal_matrices(self):
        M = self.ideal()
        assert np.array_equal(correction_vector(M, M), np.ones(4))

    def test_correction_recovers_column_scaling(self):
        M = self.ideal()
        E = M.copy()
        E[:, 1] *= 0.5
        v = correction_vector(E, M)
        assert np.allclose(v, [1, 0.5, 1, 1], rtol=0, atol=1e-15)
        assert np.allclose(apply_correction(M, v), E, rtol=0, atol=1e-15)
        corr, _ = corrected_matrix(E, M)
        assert np.allclose(corr, M, atol=1e-15)

    def test_correction_zero_denominator(self):
        M = self.ideal()
        Z = M.copy()
        Z[0, 0] = 0
        with pytest.raises(InvalidArgument):
            correction_vector(M, Z)

    def test_correction_shape_check(self):
        with pytest.raises(InvalidArgument):
            correction_vector(np.ones((3, 3)), np.ones((3, 3)))

    @pytest.mark.parametrize("F", [0.0, 0.5, 0.95])
    def test_confusion_of_ideal_is_identity(self, F):
        assert np.allclose(confusion_matrix(self.ideal(4, F)), np.eye(4), atol=1e-12)

    def test_confusion_uniform_rows(self):
        assert np.allclose(confusion_matrix(np.full((3, 4), 0.25)), np.full((3, 3), 1 / 3))

    def test_confusion_all_ambiguous_row(self):
        m = np.array([[0.5, 0.0, 0.5], [0.0, 0.0, 1.0]])
        with pytest.raises(InvalidArgument, match="row 1"):
            confusion_matrix(m)

    def test_error_probability_arithmetic(self):
        m = np.array([[0.8, 0.1, 0.05, 0.05], [0, 1, 0, 0], [0, 0, 1, 0]])
        rows, mean = error_probability(m)
        assert rows[0] == pytest.approx(0.15)
        assert mean == pytest.approx(0.05)
        assert error_probability(np.hstack([np.eye(3), np.zeros((3, 1))]))[1] == 0

    def test_accuracy_is_mean_diagonal(self):
        m = np.array([[0.9, 0.1, 0.0], [0.2, 0.8, 0.0]])
        assert classification_accuracy(m) == pytest.approx(0.85)

    def test_report_flags(self):
        rows = usd_vs_mesd_report([(3, F, self.ideal(3, F)) for F in (0.0, 0.3, 0.9)])
        assert [r.below_bound for r in rows] == [False, True, True]
        assert rows[0].bound == 0.0
        assert rows[1].to_dict()["p_err"] == pytest.approx(0.0, abs=1e-12)


@pytest.fixture(scope="module")
def design():
    geom = Geometry(
        nx=64, ny=64, pitch=10e-6, n_planes=3, plane_spacing=5e-3, lead_in=5e-3, lead_out=5e-3,
        hg_waist=50e-6, spot_waist=40e-6, spot_radius=130e-6,
    )
    return build_sorter(2, 0.3, geom, WFMOptions(max_sweeps=30))


class TestTrainedSorter:
    def test_training_improves_overlap(self, design):
        assert design.report.eta_trace[-1] > design.report.eta_initial
        assert design.system is not None

    def test_report_contents(self, design):
        rep = run_report(design, simulate_outcomes(design))
        for key in ("raw", "normalized", "corrected", "confusion", "p_err", "mesd_bound", "eta_trace", "params"):
            assert key in rep
        assert np.allclose(np.sum(rep["normalized"], axis=1), 1.0, atol=1e-9)
        assert np.allclose(np.sum(rep["corrected"], axis=1), 1.0, atol=1e-9)
        assert rep["params"]["d"] == 2


class TestImages:
    def test_orthogonal_images_sort_perfectly_when_injected(self, tiny_geometry):
        g = tiny_geometry.grid()
        imgs = [gaussian_spot(g, 40e-6, c) for c in [(-150e-6, 0.0), (0.0, 150e-6), (150e-6, 0.0)]]
        res = image_usd(imgs, tiny_geometry, train=False)
        assert np.allclose(res.fidelities, np.eye(3), atol=1e-6)
        des = res.design
        from mplc_usd.experiment import simulate_outcomes as sim

        out = sim(des, ideal=True)
        assert classification_accuracy(out.normalized) == pytest.approx(1.0, abs=1e-6)

    def test_identical_images_are_degenerate(self, tiny_geometry):
        g = tiny_geometry.grid()
        f = hermite_gaussian(g, 0, 0, 50e-6)
        with pytest.raises(DegenerateInput), pytest.warns(UserWarning):
            image_design([f, f, hermite_gaussian(g, 1, 0, 50e-6)], tiny_geometry)

    def test_uneven_fidelities_warn(self, tiny_geometry):
        g = tiny_geometry.grid()
        a = hermite_gaussian(g, 0, 0, 50e-6)
        b = hermite_gaussian(g, 1, 0, 50e-6)
        c = (a * 0.95 + hermite_gaussian(g, 0, 1, 50e-6) * 0.3).normalized()
        with pytest.warns(UserWarning, match="not symmetric"):
            image_design([a, b, c], tiny_geometry, aux=hermite_gaussian(g, 2, 0, 50e-6), fidelity_tolerance=0.05)

    def test_symmetric_images_give_unambiguous_design(self, tiny_geometry):
        g = tiny_geometry.grid()
        basis = [hermite_gaussian(g, m, 2 - m, 50e-6) for m in range(3)]
        s = symmetric_states(3, theta_for_fidelity(3, 0.34)).states
        imgs = [Field(g, sum(c * b.amplitude for c, b in zip(row, basis))) for row in s]
        des = image_design(imgs, tiny_geometry)
        P = simulate_outcomes(des, ideal=True).normalized
        assert np.allclose(confusion_matrix(P), np.eye(3), atol=1e-6)
