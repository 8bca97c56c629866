"""Moving sign vectors between workers and the parameter server."""
from .frames import Frame, FrameError, MsgType, WireStats, decode_frame, encode_frame
from .sim import SimTrace, sim_network
from .tcp import ServerReport, TcpServer, WorkerReport, run_server, run_worker

__all__ = [
    "Frame", "FrameError", "MsgType", "WireStats", "decode_frame", "encode_frame",
    "SimTrace", "sim_network",
    "ServerReport", "TcpServer", "WorkerReport", "run_server", "run_worker",
]
