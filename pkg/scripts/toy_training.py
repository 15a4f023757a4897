#!/usr/bin/env python3
"""Train the desk-scale network on synthetic 3-class blobs and print the loss curve."""
import argparse
import time

from struct2func import netspec, toynet


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lr", type=float, default=0.5)
    ap.add_argument("--save", help="write trained weights to this .s2fw file")
    args = ap.parse_args()

    g = netspec.build_architecture(netspec.small_config())
    print(f"parameters: {netspec.count_parameters(g).total}")
    X, y = toynet.make_blobs(g, n=args.samples, seed=args.seed)
    gx, gy = toynet.make_blobs(g, n=6, seed=args.seed + 1)
    print(f"gradient check relative error: {toynet.gradient_check(g, gx, gy, seed=args.seed):.2e}")

    t0 = time.perf_counter()
    res = toynet.toy_train(g, X, y, lr=args.lr, epochs=args.epochs, seed=args.seed)
    for epoch in range(0, len(res.loss_trace), max(1, args.epochs // 10)):
        print(f"epoch {epoch:4d}  loss {res.loss_trace[epoch]:.6f}")
    print(f"final loss {res.loss_trace[-1]:.6f}, training accuracy {res.accuracy:.3f}, "
          f"{time.perf_counter() - t0:.1f}s")
    if args.save:
        netspec.write_weights(res.weights, args.save)


if __name__ == "__main__":
    main()
