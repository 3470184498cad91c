"""Dense reference implementations used only by the tests."""
import numpy as np

from hpstmg.operators import assemble_sparse_oracle


def dense_operator(op):
    return assemble_sparse_oracle(op).toarray()


def dense_vanka(op, cell_sets):
    """``W sum_T R_T^T (R_T D R_T^T)^{-1} R_T`` built from scratch."""
    D = dense_operator(op)
    vs, ps, lay = op.vspace, op.pspace, op.layout
    n = op.size
    S = np.zeros((n, n))
    count = np.zeros(n)
    for cells in cell_sets:
        v = sorted({int(i) for c in cells for i in vs.cell_dofs[c] if not vs.boundary_mask[i]})
        p = sorted({int(i) for c in cells for i in ps.cell_dofs[c]})
        ids = [a * lay.n_v + i for a in range(lay.nb) for i in v]
        ids += [lay.nb * lay.n_v + a * lay.n_p + i for a in range(lay.nb) for i in p]
        ids = np.array(ids)
        S[np.ix_(ids, ids)] += np.linalg.inv(D[np.ix_(ids, ids)])
        count[ids] += 1
    w = np.where(count > 0, 1.0 / np.maximum(count, 1), 0.0)
    return w[:, None] * S


def _mean_zero(level, X):
    lay, ps = level.operator.layout, level.pspace
    V, P = lay.split(X)
    m = ps.mean_vector
    P = P - np.outer(P @ m / ps.domain_volume, ps.const_vector)
    return lay.join(V, P)


def dense_vcycle(levels, omega=0.8, nu1=1, nu2=1):
    """Explicit matrix of one V-cycle (cell patches, mean-zero projections)."""
    mats = []
    for ell, lv in enumerate(levels):
        op = lv.operator
        n = op.size
        D = dense_operator(op)
        lay, ps = op.layout, lv.pspace
        # pressure mean-zero projector per temporal node
        Pi = np.eye(n)
        m = ps.mean_vector / ps.domain_volume
        for a in range(lay.nb):
            off = lay.nb * lay.n_v + a * lay.n_p
            Pi[off:off + lay.n_p, off:off + lay.n_p] -= np.outer(ps.const_vector, m)
        Z = np.diag((~op.constrained_mask).astype(float))
        if ell == 0:
            mats.append(Pi @ np.linalg.pinv(D, rcond=1e-12))
            continue
        W = dense_vanka(op, [[c] for c in range(lv.vspace.level.n_cells)])
        P = lv.transfer.prolongation_matrix().toarray()
        Zc = np.diag((~levels[ell - 1].operator.constrained_mask).astype(float))
        Pic = np.eye(P.shape[1])
        pc = levels[ell - 1].pspace
        lc = levels[ell - 1].operator.layout
        mc = pc.mean_vector / pc.domain_volume
        for a in range(lc.nb):
            off = lc.nb * lc.n_v + a * lc.n_p
            Pic[off:off + lc.n_p, off:off + lc.n_p] -= np.outer(pc.const_vector, mc)
        I = np.eye(n)
        Sm = I - omega * W @ D  # error propagation of one smoothing step
        pre = sum(np.linalg.matrix_power(Sm, j) for j in range(nu1)) @ (omega * W) if nu1 else 0 * I
        CG = Z @ P @ mats[-1] @ Pic @ Zc @ P.T
        # x = pre b; x += CG (b - D x); then nu2 smoothing steps
        X = pre + CG @ (I - D @ pre)
        for _ in range(nu2):
            X = X + omega * W @ (I - D @ X)
        mats.append(Pi @ X)
    return mats[-1]
