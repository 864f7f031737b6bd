import { ApiClient } from "./api.js";
import { SessionController } from "./state.js";
import { SessionView } from "./view.js";

/** Wire the page: base-URL box, collection picker, session bootstrap. */
async function boot(): Promise<void> {
  const query = new URLSearchParams(window.location.search);
  const baseInput = document.querySelector("#base-url") as HTMLInputElement;
  baseInput.value = query.get("api") ?? window.location.origin;

  const picker = document.querySelector("#collection") as HTMLSelectElement;
  const startButton = document.querySelector("#start") as HTMLButtonElement;
  const status = document.querySelector("#status") as HTMLElement;
  const mount = document.querySelector("#session") as HTMLElement;

  let api = new ApiClient(baseInput.value);

  async function loadCollections(): Promise<void> {
    api = new ApiClient(baseInput.value);
    picker.innerHTML = "";
    try {
      const collections = await api.listCollections();
      for (const info of collections) {
        const option = document.createElement("option");
        option.value = info.id;
        option.textContent = `${info.id} (${info.n} items)`;
        picker.appendChild(option);
      }
      status.textContent = collections.length ? "" : "no collections on this server";
    } catch (err) {
      status.textContent = String(err instanceof Error ? err.message : err);
    }
  }

  baseInput.addEventListener("change", () => void loadCollections());
  startButton.addEventListener("click", async () => {
    if (!picker.value) {
      status.textContent = "pick a collection first";
      return;
    }
    status.textContent = "starting session...";
    try {
      const info = await api.getCollection(picker.value);
      const seed = Number(query.get("seed") ?? Date.now() % 100_000);
      const controller = await SessionController.start(api, info, { seed });
      new SessionView(mount, controller, api);
      status.textContent = "";
    } catch (err) {
      status.textContent = String(err instanceof Error ? err.message : err);
    }
  });

  await loadCollections();
}

void boot();
