"""Substructure modes above an infinite PEC ground plane.

Image theory turns the half-space problem into a free-space one: every
dipole gets a mirror image below z = 0, and the plane's boundary
condition selects half of the spherical waves (TE with even l+m, TM
with odd l+m).  The script compares the parity-filtered path against
brute force on the explicit mirrored scene, then shows the classic
image-cancellation effect: a horizontal dipole close to the plane
nearly stops scattering, a vertical one does not.
"""

import numpy as np

from scatmodes import (
    DipoleScene,
    cm_ground_plane,
    cm_scattering,
    mirror_scene,
    transition,
)

def main():
    rng = np.random.default_rng(3)
    k = 1.0
    n = 4
    pos = rng.normal(size=(n, 3)) * 0.15
    pos[:, 2] = 0.12 + 0.3 * rng.random(n)
    scene = DipoleScene(pos, 6.0 * np.pi * (0.4 + rng.random(n)), ground_plane=True)

    ms = cm_ground_plane(scene, k)
    print("parity-filtered path: dominant |t|:",
          " ".join(f"{v:.4f}" for v in np.abs(ms.t[:6])))
    print("cross-parity coupling in S:", f"{ms.diagnostics['parity_leakage']:.1e}")

    # brute force: solve the full mirrored free-space problem and pick the
    # modes whose eigenvalues the filtered block reproduces
    ts = transition(mirror_scene(scene), k)
    ms_full = cm_scattering(ts.S, ts.S_b, k=k)
    matches = [np.abs(ms_full.t - t).min() for t in ms.t[:6]]
    print("per-mode distance to the brute-force spectrum:",
          " ".join(f"{d:.1e}" for d in matches))

    print("\nimage interaction at small height (k h = 0.05):")
    print("the horizontal dipole's far field cancels against its image;")
    print("the vertical one keeps radiating but is strongly detuned.")
    for axis, alpha in (("horizontal", np.diag([6.0 * np.pi, 1e-9, 1e-9])),
                        ("vertical", np.diag([1e-9, 1e-9, 6.0 * np.pi]))):
        above = DipoleScene([[0.0, 0.0, 0.05]], alpha, ground_plane=True)
        free = DipoleScene([[0.0, 0.0, 0.05]], alpha)
        t_gp = np.abs(cm_ground_plane(above, k).t).max()
        t_free = np.abs(cm_scattering(transition(free, k).S).t).max()
        print(f"  {axis:10s}: |t| above plane {t_gp:.2e}  vs isolated {t_free:.5f}")


if __name__ == "__main__":
    main()
