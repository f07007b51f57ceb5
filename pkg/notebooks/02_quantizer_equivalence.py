"""Three quantizer designs on the discretized-normal 10-atom source.

For M = 1..8 prints the expected distortion found by Lloyd-Max, by the
extremal-EMD alternation and by the exact dynamic program.
"""
from otrd.fixtures import ten_atom_source
from otrd.quantizer import extremal_emd_quantizer, kmeans_1d_exact, lloyd_max

src = ten_atom_source().source
print(f"{'M':>2} {'lloyd':>14} {'extremal emd':>14} {'exact dp':>14}")
for M in range(1, 9):
    lloyd = lloyd_max(src, M, restarts=20)
    extremal = extremal_emd_quantizer(src, M, restarts=20)
    exact = kmeans_1d_exact(src, M)
    print(f"{M:2d} {lloyd.distortion:14.10f} {extremal.distortion:14.10f} {exact.distortion:14.10f}")
    print("   codebook:", exact.codebook.round(4))
