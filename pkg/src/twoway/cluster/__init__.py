"""Master/worker round protocol, wire codec and transports."""
from .protocol import CommLedger, RoundComm, expected_round_scalars, gather_round, worker_step
from .transport import InProcessTransport, TcpMasterTransport, parse_address, run_worker
from .wire import BroadcastMsg, GradientMsg, decode, encode

__all__ = [
    "BroadcastMsg",
    "GradientMsg",
    "encode",
    "decode",
    "worker_step",
    "gather_round",
    "expected_round_scalars",
    "CommLedger",
    "RoundComm",
    "InProcessTransport",
    "TcpMasterTransport",
    "run_worker",
    "parse_address",
]
