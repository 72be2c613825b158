#!/usr/bin/env python3
"""Certify the stacked error dynamics of the 20-node reference network.

No single node can detect the full state, yet the network as a whole is
detectable, and the converged distributed gains make ``C kron I`` times the
block-diagonal closed-loop matrix a contraction after finitely many steps.
"""

from disfilter import ExperimentConfig, certify, reference_scenario, pbh_detectability


def main():
    scen = reference_scenario(seed=0)
    alone = [pbh_detectability(scen.model.A, om.H) for om in scen.obs_models]
    print(f"nodes detectable on their own: {sum(alone)} of {len(alone)}")

    cert = certify(ExperimentConfig(seed=0), scenario=scen)
    print(cert.to_text())

    blind = certify(ExperimentConfig(seed=0, vertical_observer=False, max_iter=3000))
    print("without the vertical observer:")
    print(f"  detectable={blind.detectable}  rho_CF={blind.rho_CF:.6f}  converged={blind.riccati_converged}")


if __name__ == "__main__":
    main()
