/**
 * Browser entry point. The backend host defaults to the page's own origin;
 * a `?backend=host:port` query parameter points the console elsewhere
 * (e.g. the page served from a static file server, the robot on another box).
 */
import { ControlApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("backend") ?? window.location.host;
const httpBase = `${window.location.protocol === "https:" ? "https" : "http"}://${host}`;
const wsUrl = `${window.location.protocol === "https:" ? "wss" : "ws"}://${host}/api/stream`;

console.log(`[main] backend ${httpBase}`);
const app = new ControlApp(document, httpBase, wsUrl);
void app.bootstrap();
