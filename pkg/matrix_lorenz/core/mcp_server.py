#!/usr/bin/env python3
"""
MCP Server for matrix Lorenz systems
Exposes algebra checks, the LLG map, vector fields and Lyapunov estimates as
Model Context Protocol tools for AI assistants
"""

import asyncio
import json
import logging
import sys
import traceback
from typing import Any, Callable, Dict, List

import numpy as np

from .. import __version__
from .algebra import NAMED_BASES, is_anomaly_safe, jacobi_residual, named_basis, named_tensors
from .analysis import DEFAULT_BURN_IN, DEFAULT_RENORM_INTERVAL, largest_lyapunov
from .dynamics import LorenzParams, llg_to_lorenz
from .errors import MatrixLorenzError, ParameterError
from .integrator import IntegrationSpec
from .systems import SYSTEMS, build_system

# MCP imports
try:
    from mcp.server import NotificationOptions, Server
    from mcp.server.models import InitializationOptions
    from mcp.server.stdio import stdio_server
    from mcp.types import Resource, TextContent, Tool
    MCP_AVAILABLE = True
except ImportError:
    MCP_AVAILABLE = False

logger = logging.getLogger("matrix-lorenz-mcp-server")

SERVER_NAME = "matrix-lorenz"
# Tool calls run in-process; long Lyapunov runs belong to the CLI.
MAX_TOOL_STEPS = 200_000

_PARAM_PROPERTIES = {
    "sigma": {"type": "number", "default": 10.0},
    "r": {"type": "number", "default": 28.0},
    "b": {"type": "number", "default": 8.0 / 3.0},
}


def _params(arguments: Dict[str, Any]) -> LorenzParams:
    return LorenzParams(
        sigma=float(arguments.get("sigma", 10.0)),
        r=float(arguments.get("r", 28.0)),
        b=float(arguments.get("b", 8.0 / 3.0)),
    )


class LorenzToolbox:
    """Synchronous tool implementations; each returns a JSON-ready dict"""

    def algebra_summary(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        name = arguments.get("basis", "u2")
        if name not in NAMED_BASES:
            raise ParameterError(f"Unknown basis '{name}' (expected one of {', '.join(NAMED_BASES)})")
        basis = named_basis(name)
        tensors = named_tensors(name)
        return {
            "basis": name,
            "generators": basis.m,
            "matrix_size": basis.n,
            "kappa": basis.kappa,
            "has_identity_component": basis.has_identity_component,
            "identity_slots": basis.identity_slots.tolist(),
            "jacobi_residual": jacobi_residual(tensors.f),
            "anomaly_safe": is_anomaly_safe(tensors.d),
            "nonzero_d": int(np.count_nonzero(np.abs(tensors.d) > 1e-12)),
        }

    def map_llg(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        llg = llg_to_lorenz(_params(arguments))
        return {
            "eta": llg.eta.tolist(),
            "beta": llg.beta.tolist(),
            "tau": llg.tau.tolist(),
            "d": llg.torque_d,
        }

    def lorenz_rhs(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        system = arguments.get("system", "classical")
        model = build_system(system)
        state = np.asarray(arguments.get("state", []), dtype=float)
        if state.shape != (model.dim,):
            raise ParameterError(f"system '{system}' needs a state of length {model.dim}, got {state.shape}")
        derivative = model.vector_field(_params(arguments))(0.0, state)
        return {"system": system, "derivative": derivative.tolist()}

    def largest_lyapunov(self, arguments: Dict[str, Any]) -> Dict[str, Any]:
        system = arguments.get("system", "classical")
        spec = IntegrationSpec.from_horizon(float(arguments.get("dt", 0.01)),
                                            float(arguments.get("horizon", 200.0)))
        if spec.n_steps > MAX_TOOL_STEPS:
            raise ParameterError(f"{spec.n_steps} steps exceed the tool limit of {MAX_TOOL_STEPS}")
        seed = int(arguments.get("seed", 0))
        value = largest_lyapunov(
            system, _params(arguments), spec,
            renorm_interval=int(arguments.get("renorm_interval", DEFAULT_RENORM_INTERVAL)),
            seed=seed, burn_in=float(arguments.get("burn_in", DEFAULT_BURN_IN)),
        )
        return {"system": system, "lambda_max": value, "seed": seed, "horizon": spec.horizon}

    @property
    def handlers(self) -> Dict[str, Callable[[Dict[str, Any]], Dict[str, Any]]]:
        return {
            "algebra_summary": self.algebra_summary,
            "map_llg": self.map_llg,
            "lorenz_rhs": self.lorenz_rhs,
            "largest_lyapunov": self.largest_lyapunov,
        }

    def call(self, name: str, arguments: Dict[str, Any]) -> str:
        """Run a tool and render its result (or error) as JSON text"""
        handler = self.handlers.get(name)
        if handler is None:
            return json.dumps({"error": f"Unknown tool: {name}"})
        try:
            return json.dumps(handler(arguments or {}), sort_keys=True)
        except MatrixLorenzError as e:
            logger.warning(f"Tool {name} rejected arguments: {e}")
            return json.dumps({"error": str(e)})


class MatrixLorenzMCPServer:
    """MCP server wrapping LorenzToolbox on stdio"""

    def __init__(self):
        if not MCP_AVAILABLE:
            logger.error("MCP library not available")
            raise ImportError("MCP library required but not found")

        self.server = Server(SERVER_NAME)
        self.toolbox = LorenzToolbox()
        self._setup_tools()
        self._setup_resources()

    def _setup_tools(self):
        system_property = {"type": "string", "enum": list(SYSTEMS), "default": "classical"}

        @self.server.list_tools()
        async def handle_list_tools() -> List[Tool]:
            return [
                Tool(
                    name="algebra_summary",
                    description="Structure-tensor checks for a built-in Lie algebra basis",
                    inputSchema={
                        "type": "object",
                        "properties": {"basis": {"type": "string", "enum": list(NAMED_BASES), "default": "u2"}},
                    },
                ),
                Tool(
                    name="map_llg",
                    description="LLG spin parameters under which the spin equations reproduce a Lorenz system",
                    inputSchema={"type": "object", "properties": dict(_PARAM_PROPERTIES)},
                ),
                Tool(
                    name="lorenz_rhs",
                    description="Evaluate the vector field of a classical or matrix Lorenz system",
                    inputSchema={
                        "type": "object",
                        "properties": {
                            "system": system_property,
                            "state": {"type": "array", "items": {"type": "number"}},
                            **_PARAM_PROPERTIES,
                        },
                        "required": ["state"],
                    },
                ),
                Tool(
                    name="largest_lyapunov",
                    description="Benettin estimate of the largest Lyapunov exponent for one seed",
                    inputSchema={
                        "type": "object",
                        "properties": {
                            "system": system_property,
                            "dt": {"type": "number", "default": 0.01},
                            "horizon": {"type": "number", "default": 200.0},
                            "seed": {"type": "integer", "default": 0},
                            "renorm_interval": {"type": "integer", "default": DEFAULT_RENORM_INTERVAL},
                            "burn_in": {"type": "number", "default": DEFAULT_BURN_IN},
                            **_PARAM_PROPERTIES,
                        },
                    },
                ),
            ]

        @self.server.call_tool()
        async def handle_call_tool(name: str, arguments: dict) -> List[TextContent]:
            try:
                text = await asyncio.to_thread(self.toolbox.call, name, arguments)
            except Exception as e:
                logger.error(f"Error handling tool call {name}: {e}")
                text = json.dumps({"error": str(e)})
            return [TextContent(type="text", text=text)]

    def _setup_resources(self):
        @self.server.list_resources()
        async def handle_list_resources() -> List[Resource]:
            return [
                Resource(
                    uri="matrix-lorenz://systems",
                    name="Simulated systems",
                    description="System selectors accepted by the tools",
                    mimeType="application/json",
                )
            ]

        @self.server.read_resource()
        async def handle_read_resource(uri) -> str:
            if str(uri) == "matrix-lorenz://systems":
                return json.dumps({"systems": list(SYSTEMS), "bases": list(NAMED_BASES)})
            raise ValueError(f"Unknown resource: {uri}")

    async def run(self):
        async with stdio_server() as (read_stream, write_stream):
            await self.server.run(
                read_stream,
                write_stream,
                InitializationOptions(
                    server_name=SERVER_NAME,
                    server_version=__version__,
                    capabilities=self.server.get_capabilities(
                        notification_options=NotificationOptions(),
                        experimental_capabilities={},
                    ),
                ),
            )


def main() -> int:
    """Main entry point for the stdio server"""
    try:
        server = MatrixLorenzMCPServer()
        asyncio.run(server.run())
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Server error: {e}")
        logger.error(traceback.format_exc())
        return 1
    return 0


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                        stream=sys.stderr)
    sys.exit(main())
