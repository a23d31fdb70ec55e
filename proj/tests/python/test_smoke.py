import math
import unittest

import numpy as np

import bidomain


class SmokeTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.heart = bidomain.icosphere(1.0, 3)
        cls.torso = bidomain.icosphere(2.0, 3, surface_id="torso")
        cls.data = bidomain.synth(cls.heart, cls.torso, 1.0, 2.0, [(1, 0, 10.0)])

    def test_mesh_arrays(self):
        self.assertEqual(self.heart.vertices.shape, (642, 3))
        self.assertEqual(self.heart.triangles.shape, (1280, 3))
        self.assertAlmostEqual(self.heart.node_weights.sum(), self.heart.total_area, places=10)
        copy = bidomain.SurfaceMesh(self.heart.vertices, self.heart.triangles, "copy")
        self.assertEqual(copy.triangle_count, 1280)

    def test_synth_consistency(self):
        d = self.data
        self.assertAlmostEqual(d["lambda"], 3.75)
        np.testing.assert_allclose(d["v"], d["u_i"] - d["u_e"], atol=1e-12)
        self.assertLess(d["transmission_residual"], 1e-10)

    def test_protocol_1(self):
        out = bidomain.protocol_1(self.heart, self.torso, self.data["u_e"])
        span = np.ptp(self.data["v"])
        self.assertLess(bidomain.rmse(out["v"], self.data["v"]), 0.05 * span)
        self.assertLess(out["diagnostics"]["conservation_residual"], 1e-3)

    def test_protocol_2(self):
        f = bidomain.add_gaussian_noise(self.data["torso"], 0.01, 7)
        out = bidomain.protocol_2(self.heart, self.torso, f)
        self.assertLess(bidomain.rmse(out["v"], self.data["v"]), 0.2 * np.ptp(self.data["v"]))
        self.assertGreater(out["diagnostics"]["alpha"], 0.0)

    def test_heat_kernel(self):
        self.assertEqual(bidomain.heat_kernel([0, 0, 0], [0, 0, 0], 0.0, 0.0), 0.0)
        expected = (4 * math.pi * 0.5) ** -1.5
        self.assertAlmostEqual(bidomain.heat_kernel([0, 0, 0], [0, 0, 0], 1.0, 0.5), expected, places=12)

    def test_parabolic_green(self):
        ball = bidomain.icosphere(1.0, 3)
        steps, t_end = 6, 0.5
        x = ball.vertices
        times = np.linspace(0.0, t_end, steps)
        trace = (x**2).sum(axis=1)[:, None] + 6 * times[None, :]
        flux = np.full_like(trace, 2.0)
        value = bidomain.parabolic_green(ball, trace, flux, t_end, lambda p: float(np.dot(p, p)), [0, 0, 0], t_end)
        self.assertAlmostEqual(value, 3.0, delta=0.06)

    def test_lcurve_corner(self):
        alphas = np.logspace(-8, 0, 17)
        pts = [(math.log(a + 1e-4), math.log(1 / (a + 1e-6))) for a in alphas]
        idx = bidomain.lcurve_corner(pts)
        self.assertTrue(0 < idx < len(pts) - 1)

    def test_report_table(self):
        text = bidomain.report_table([("LV", 5.714, 19.81), ("RV", 1.0, None)])
        self.assertEqual(text.splitlines()[1], "LV  5.71 mV  19.81 mV")
        self.assertEqual(text.splitlines()[2], "RV  1.00 mV  -")

    def test_errors(self):
        with self.assertRaises(bidomain.BidomainError):
            bidomain.rmse(np.zeros(3), np.zeros(4))
        with self.assertRaises(bidomain.BidomainError):
            bidomain.report_table([("LV", float("nan"), None)])


if __name__ == "__main__":
    unittest.main()
