# kind: main
# target: external-runtime
# provides: main/0
# requires: train/2, evaluate/1
import sys

from training_loop import train
from validation import evaluate

SEED = {{seed}}


def main():
    trace_path = sys.argv[1] if len(sys.argv) > 1 else "trace.jsonl"
    net = train(SEED, trace_path)
    print(f"residual_mse={evaluate(net)}")


if __name__ == "__main__":
    main()
