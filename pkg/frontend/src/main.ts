import { DuctClient } from "./api.js";
import { Navigator } from "./controller.js";
import { render } from "./render.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8000";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const client = new DuctClient(apiBase);
const navigator = new Navigator(client, (state) =>
  render(root, state, navigator),
);
void navigator.boot();
