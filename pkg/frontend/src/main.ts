/** Browser bootstrap: fetch the scene, build the city, join the session. */

import { CityScene } from "./city";
import { PanelController } from "./panel";
import { parseSceneText, SceneFormatError } from "./scene";
import { ORIGIN_POSE, SessionClient } from "./session";
import type { PanelContent, SceneDocument } from "./types";
import { Viewer } from "./viewer";

const POSE_SEND_INTERVAL_MS = 100;

async function sha256Hex(text: string): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", new TextEncoder().encode(text));
  return [...new Uint8Array(digest)].map((byte) => byte.toString(16).padStart(2, "0")).join("");
}

function showError(title: string, detail: string): void {
  const element = document.getElementById("error") as HTMLElement;
  element.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = title;
  const body = document.createElement("pre");
  body.textContent = detail;
  element.append(heading, body);
  element.style.display = "block";
}

function renderPanel(content: PanelContent | null): void {
  const element = document.getElementById("panel") as HTMLElement;
  if (content === null) {
    element.style.display = "none";
    return;
  }
  element.innerHTML = "";
  const title = document.createElement("h3");
  title.textContent = content.title;
  const loc = document.createElement("p");
  loc.textContent = `${content.loc} lines of code`;
  element.append(title, loc);
  for (const entry of content.entries) {
    const item = document.createElement("div");
    item.className = `finding severity-${entry.severity.toLowerCase()}`;
    const head = document.createElement("strong");
    head.textContent = `[${entry.severity}] ${entry.bugType}`;
    const message = document.createElement("p");
    message.textContent = entry.shortMessage;
    const details = document.createElement("p");
    details.textContent = entry.details;
    item.append(head, message, details);
    element.append(item);
  }
  element.style.display = "block";
}

function renderHelp(doc: SceneDocument): void {
  const element = document.getElementById("help") as HTMLElement;
  element.innerHTML = "";
  const controls = document.createElement("pre");
  controls.textContent = [
    "WASD  move (Q/E vertical in fly mode)",
    "G     switch ground/fly mode",
    "click select or teleport on a platform",
    "C     toggle call graph for selection",
    "H     show/hide this help",
  ].join("\n");
  element.append(controls);
  for (const entry of doc.legend) {
    const row = document.createElement("div");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    const { r, g, b } = entry.color;
    swatch.style.background = `rgb(${r * 255}, ${g * 255}, ${b * 255})`;
    const label = document.createElement("span");
    label.textContent = entry.label;
    row.append(swatch, label);
    element.append(row);
  }
}

async function boot(): Promise<void> {
  const container = document.getElementById("app") as HTMLElement;
  const response = await fetch("/scene.json");
  if (!response.ok) {
    showError("scene unavailable", `GET /scene.json returned ${response.status}`);
    return;
  }
  const text = await response.text();
  const sceneHash = await sha256Hex(text);

  let doc: SceneDocument;
  try {
    doc = parseSceneText(text);
  } catch (error) {
    if (error instanceof SceneFormatError) {
      showError("scene format mismatch", `${error.message}\nscene hash: ${sceneHash}`);
      return;
    }
    throw error;
  }

  const city = new CityScene(doc);
  const panel = new PanelController(doc);
  const viewer = new Viewer({ container, city, panel });
  renderHelp(doc);

  const protocol = location.protocol === "https:" ? "wss" : "ws";
  const socket = new WebSocket(`${protocol}://${location.host}/ws`);
  const client = new SessionClient({ send: (message) => socket.send(message) });
  viewer.attachSession(client);
  client.events.onError = (code, message) => {
    if (code === "scene-mismatch") {
      showError("scene mismatch", `${message}\nscene hash: ${sceneHash}`);
    }
  };

  socket.addEventListener("open", () => {
    const name = new URLSearchParams(location.search).get("name") ?? "Explorer";
    client.join("default", name, sceneHash);
  });
  socket.addEventListener("message", (event) => client.receive(String(event.data)));
  window.addEventListener("beforeunload", () => client.leave());

  let lastPose = 0;
  const sendPose = (now: number): void => {
    if (socket.readyState === WebSocket.OPEN && client.selfId !== null) {
      if (now - lastPose >= POSE_SEND_INTERVAL_MS) {
        const { x, y, z } = viewer.camera.position;
        const { x: qx, y: qy, z: qz, w: qw } = viewer.camera.quaternion;
        client.sendPose({ p: [x, y, z], q: [qx, qy, qz, qw] }, [ORIGIN_POSE, ORIGIN_POSE]);
        lastPose = now;
      }
    }
  };

  container.addEventListener("click", (event) => {
    const bounds = container.getBoundingClientRect();
    const ndcX = ((event.clientX - bounds.left) / bounds.width) * 2 - 1;
    const ndcY = -(((event.clientY - bounds.top) / bounds.height) * 2 - 1);
    viewer.pick(ndcX, ndcY);
    renderPanel(panel.content);
  });
  window.addEventListener("keydown", (event) => {
    const key = event.key.toLowerCase();
    if (key === "g") {
      viewer.toggleMode();
    } else if (key === "c") {
      viewer.toggleSelectedOverlay();
    } else if (key === "h") {
      const help = document.getElementById("help") as HTMLElement;
      help.style.display = help.style.display === "none" ? "block" : "none";
    }
  });
  const panelElement = document.getElementById("panel") as HTMLElement;
  panelElement.addEventListener("wheel", (event) => {
    panel.scrollBy(event.deltaY);
    panelElement.scrollTop = panel.current.scrollOffset;
  });

  let previous = performance.now();
  const frame = (now: number): void => {
    viewer.update((now - previous) / 1000);
    previous = now;
    sendPose(now);
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

void boot();
